"""hyrel: model finding and bounded model checking for hyperproperties over
high-level relational temporal models."""

__version__ = "0.1.0"
