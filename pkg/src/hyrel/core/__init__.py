from .ast import *  # noqa: F401,F403
from .bounds import (  # noqa: F401
    constant_decls, expand_lower, expand_upper, satisfies_bounds,
    tree_expansion, tree_satisfied, upper_satisfied,
)
from .eval import (  # noqa: F401
    eval_bounded, eval_expr, eval_formula, join, past_depth,
    prime_depth_expr, prime_depth_formula, transitive_closure,
)
from .enumerate import (  # noqa: F401
    InstancePool, enumerate_lassos, find_instance, is_instance,
    relation_values,
)
