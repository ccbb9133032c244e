"""Exact symbolic core: expressions, parsing, normal forms, calculus, evaluation."""
from condsym.symcore.calculus import differentiate, simplify, substitute
from condsym.symcore.evaluate import (
    Assignment,
    DomainError,
    EvaluationError,
    Program,
    UnboundSymbolError,
    compile_program,
    eval_numeric,
)
from condsym.symcore.expr import (
    ONE,
    ZERO,
    Add,
    Call,
    Expr,
    Fn,
    Lambda,
    Mul,
    Num,
    Pow,
    Sym,
    absval,
    add,
    exp,
    free_symbols,
    function_symbols,
    ln,
    mul,
    neg,
    power,
    sqrt,
    symbols,
)
from condsym.symcore.normal import (
    NormalExpr,
    equal,
    is_zero,
    ndiff,
    normalize,
    nsubs,
    positive_symbols,
    to_expr,
    together,
)
from condsym.symcore.parser import ParseError, parse
from condsym.symcore.poly import PARAMETERS, Poly
from condsym.symcore.printer import to_string
from condsym.symcore.scales import ScaleError, collect_scales, scale_expr

format_expr = to_string

__all__ = [name for name in dir() if not name.startswith("_")]
