"""MFCC emotion recognition with pitch-shift enlargement of the training set."""

__version__ = "0.1.0"
