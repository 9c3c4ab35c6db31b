"""gridleak: property-inference attack harness for personalized load forecasters."""

__version__ = "0.1.0"
