"""Hedlund metrics on flat tori and certified stable-norm sandwiches."""

__version__ = "0.1.0"
