"""FastMCP server exposing the quantum lens space computations as tools."""
import logging

from fastmcp import FastMCP
from pydantic import ValidationError

from .checks import SUITES, run_suite
from .errors import QLensError
from .expr import degree_decompose, normalize
from .groupoid import embed_normalform
from .json_validator import JsonDict
from .models import RepParams, RunConfig
from .modules import (
    canonical_projection,
    k_invariant,
    line_bundle_projection,
    load_projection,
    verify_line_bundle_iso,
    verify_projection,
)
from .structure import symbol

logger = logging.getLogger(__name__)

TOOL_ERRORS = (QLensError, ValidationError, ValueError)

# Initialize FastMCP server
mcp = FastMCP("Quantum Lens Space MCP")


@mcp.tool()
async def normalize_expression(text: str, l: int = 2) -> dict:
    """
    Normal form of a *-polynomial in c, d over Q(i)[q, q^-1].

    Args:
        text: Expression such as "d . c" or "(c + q^2 d*)^2".
        l: Lens parameter, l >= 1.
    """
    try:
        nf = normalize(text, l)
    except TOOL_ERRORS as e:
        return {"error": str(e)}
    return {"normalform": nf.format(), "degree": nf.homogeneous_degree()}


@mcp.tool()
async def decompose_degrees(text: str, l: int = 2) -> dict:
    """
    Split an expression into its homogeneous components.

    Args:
        text: Expression in c, d, c*, d*.
        l: Lens parameter, l >= 1.

    Returns a map from degree to the normal form of that component.
    """
    try:
        parts = degree_decompose(normalize(text, l))
    except TOOL_ERRORS as e:
        return {"error": str(e)}
    return {"components": {str(n): part.format() for n, part in sorted(parts.items())}}


@mcp.tool()
async def symbol_of(text: str, l: int = 2, q: float = 0.5) -> dict:
    """
    Symbol of an expression: its image in C(S^1) as {exponent: [re, im]}.

    Args:
        text: Expression in c, d, c*, d*.
        l: Lens parameter.
        q: Deformation parameter, 0 < q < 1.
    """
    try:
        params = RepParams(q=q, l=l)
        element = embed_normalform(normalize(text, l), params)
    except TOOL_ERRORS as e:
        return {"error": str(e)}
    return {"symbol": symbol(element).to_json()}


@mcp.tool()
async def classify_projection(projection: JsonDict, tol: float = 1e-9) -> dict:
    """
    Verify a projection over (K^l)^+ and compute its invariant (rho; t_1..t_l).

    Args:
        projection: Projection document, as an object or a JSON string:
            {"l": 2, "N": 16, "r": 1, "entries": [[{"scalar": [1, 0], "compact": [...]}]]}
        tol: Tolerance for idempotency and self-adjointness.
    """
    if projection is None:
        return {"error": "projection is required"}
    try:
        P = load_projection(projection)
        report = verify_projection(P, tol)
        if not report.passed:
            return {"verification": report.model_dump(), "invariant": None}
        inv = k_invariant(P, tol)
        canonical = canonical_projection(inv, P.l, P.N)
    except TOOL_ERRORS as e:
        return {"error": str(e)}
    return {
        "verification": report.model_dump(),
        "invariant": inv.as_list(),
        "canonical_size": canonical.r,
    }


@mcp.tool()
async def line_bundle(n: int, l: int = 2, N: int = 32, q: float = 0.5, samples: int = 20) -> dict:
    """
    The line bundle of degree n: its projection, invariant and an isomorphism check.

    Args:
        n: Degree of the line bundle.
        l: Lens parameter.
        N: Truncation of each leg.
        q: Deformation parameter.
        samples: Random samples for the isomorphism check.
    """
    try:
        P = line_bundle_projection(n, l, N)
        inv = k_invariant(P)
        iso = verify_line_bundle_iso(n, RepParams(q=q, l=l, N=N), samples)
    except TOOL_ERRORS as e:
        return {"error": str(e)}
    return {
        "n": n,
        "invariant": inv.as_list(),
        "free": all(t == 0 for t in inv.t) and inv.rho == 1,
        "projection_size": P.r,
        "iso": iso.model_dump(),
    }


@mcp.tool()
async def run_check(name: str, config: JsonDict = None) -> dict:
    """
    Run one acceptance suite and return its report.

    Args:
        name: One of verify-relations, check-faithful, groupoid-check, grading-check,
            structure-check, classify, line-bundle, report-all.
        config: Optional RunConfig overrides, e.g. {"l": 1, "N": 32, "samples": 20}.
    """
    if name not in SUITES:
        return {"error": f"Unknown check {name!r}", "available": list(SUITES)}
    logger.debug("run_check %s with %s", name, config)
    try:
        report = run_suite(name, RunConfig(**(config or {})))
    except TOOL_ERRORS as e:
        return {"error": str(e)}
    return report.model_dump(mode="json")


def main():
    """Entry point of the qlens-mcp console script."""
    mcp.run()


if __name__ == "__main__":
    main()
