"""Input surfaces: the relational modeling language, the declarative SMV
subset, and prenex HyperLTL, plus elaboration into hyper problems."""

from .spec_parser import (  # noqa: F401
    ParseError, SpecModel, parse_spec, print_spec,
)
from .smv_parser import SmvSource, parse_smv  # noqa: F401
from .hltl_parser import parse_hyperltl, print_hyperltl  # noqa: F401
from .elaborate import ElabResult, elaborate  # noqa: F401
