"""Closed symbolic rule language: grammar, AST, evaluator, printer."""
from .ast import (
    And,
    ArgCmp,
    ArgRef,
    Expr,
    HasToolAtLeast,
    InventoryAtLeast,
    KgSatisfied,
    Lit,
    Membership,
    Not,
    ObsCmp,
    Or,
    Polarity,
    RuleAst,
    SgContains,
    SgUnexplored,
    pretty_print,
)
from .evaluate import (
    EvalDiagnostics,
    JointVerdict,
    RuleVerdict,
    evaluate,
    evaluate_all,
    missing_materials,
    render_template,
)
from .parser import ParseError, RuleTypeError, parse, parse_many

__all__ = [
    "And", "ArgCmp", "ArgRef", "EvalDiagnostics", "Expr", "HasToolAtLeast",
    "InventoryAtLeast", "JointVerdict", "KgSatisfied", "Lit", "Membership",
    "Not", "ObsCmp", "Or", "ParseError", "Polarity", "RuleAst",
    "RuleTypeError", "RuleVerdict", "SgContains", "SgUnexplored", "evaluate",
    "evaluate_all", "missing_materials", "parse", "parse_many",
    "pretty_print", "render_template",
]
