"""Dirac second-class-constraint analysis and canonical-quantization checks
for particle motion on a torus, with an independent pseudospectral oracle."""

from .symcore import Expr, SYM, diff, equal, eval_numeric, normalize, substitute

__version__ = "0.1.0"

__all__ = ["Expr", "SYM", "diff", "equal", "eval_numeric", "normalize", "substitute"]
