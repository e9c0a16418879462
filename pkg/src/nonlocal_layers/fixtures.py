"""The four reference problems used throughout the tests and the CLI."""

from __future__ import annotations

from .geometry import DomainGeometry, make_domain
from .nonlinearity import NonlocalProblem, ScalarFamily

FIXTURE_NAMES = ("FIX-L0", "FIX-L1", "FIX-LG", "FIX-NL")


def fixture(name: str) -> tuple[NonlocalProblem, DomainGeometry]:
    lin = ScalarFamily("linear", (1.0,))
    one = ScalarFamily("constant", (1.0,))
    if name == "FIX-L0":
        return NonlocalProblem(lin, lin, one, 1.0, 0.0), make_domain("ball", 2, (1.0,))
    if name == "FIX-L1":
        A = ScalarFamily("affine", (1.0, 1.0))
        return NonlocalProblem(lin, lin, A, 1.0, 0.0), make_domain("ball", 2, (1.0,))
    if name == "FIX-LG":
        return NonlocalProblem(lin, lin, one, 1.0, 1.0), make_domain("interval", 1, (1.0,))
    if name == "FIX-NL":
        p = NonlocalProblem(
            ScalarFamily("cubic", (1.0, 1.0)),
            ScalarFamily("power", (2.0,)),
            ScalarFamily("affine-exp", (1.0, -1.0)),
            1.0,
            0.0,
        )
        return p, make_domain("ball", 3, (1.0,))
    raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURE_NAMES}")
