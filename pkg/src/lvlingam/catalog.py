"""Named example graphs used throughout the tests, scripts and CLI examples."""

from __future__ import annotations

from .graph import LvDag


def iv() -> LvDag:
    """Instrumental variable: I -> T -> Y with a latent confounder of T and Y."""
    return LvDag.from_names("ITY", "L", [("I", "T"), ("T", "Y"), ("L", "T"), ("L", "Y")])


def proxy() -> LvDag:
    """Single proxy W for two confounders; includes the latent-to-latent edge."""
    edges = [("L1", "L2"), ("W", "T"), ("W", "Y"), ("T", "Y")]
    edges += [(l, v) for l in ("L1", "L2") for v in "TYW"]
    return LvDag.from_names(["W", "T", "Y"], ["L1", "L2"], edges)


def longitudinal() -> LvDag:
    """Two-period panel with a time-invariant confounder L and covariate C."""
    edges = [("L", v) for v in ["C", "T1", "T2", "Y1", "Y2"]]
    edges += [("C", v) for v in ["T1", "T2", "Y1", "Y2"]]
    edges += [("T1", "T2"), ("T1", "Y1"), ("T2", "Y2")]
    return LvDag.from_names(["C", "T1", "T2", "Y1", "Y2"], ["L"], edges)


def longitudinal_varying() -> LvDag:
    """Panel with a time-varying confounder and one covariate per period."""
    edges = [("L1", "L2")]
    edges += [("L1", v) for v in ["C1", "C2", "T1", "T2", "Y1", "Y2"]]
    edges += [("L2", v) for v in ["C2", "T2", "Y2"]]
    edges += [("C1", v) for v in ["C2", "T1", "T2", "Y1", "Y2"]]
    edges += [("C2", v) for v in ["T2", "Y2"]]
    edges += [("T1", "T2"), ("T1", "Y1"), ("T2", "Y2")]
    return LvDag.from_names(["C1", "C2", "T1", "T2", "Y1", "Y2"], ["L1", "L2"], edges)


def underspecified_iv() -> LvDag:
    """One instrument, two treatments, each treatment confounded with Y."""
    edges = [("I", "T1"), ("I", "T2"), ("T1", "Y"), ("T2", "Y"),
             ("L1", "T1"), ("L1", "Y"), ("L2", "T2"), ("L2", "Y")]
    return LvDag.from_names(["I", "T1", "T2", "Y"], ["L1", "L2"], edges)


def g1() -> LvDag:
    """Proxy W of a confounder L1 of T -> Y."""
    return LvDag.from_names(["W", "T", "Y"], ["L1"],
                            [("L1", "W"), ("L1", "T"), ("L1", "Y"), ("T", "Y")])


def g2() -> LvDag:
    """As :func:`g1` with an extra edge W -> T."""
    return LvDag.from_names(["W", "T", "Y"], ["L1"],
                            [("L1", "W"), ("L1", "T"), ("L1", "Y"), ("T", "Y"), ("W", "T")])


def g3() -> LvDag:
    """As :func:`g1` with a second proxy Z."""
    return LvDag.from_names(["W", "Z", "T", "Y"], ["L1"],
                            [("L1", "W"), ("L1", "Z"), ("L1", "T"), ("L1", "Y"), ("T", "Y")])


def g4() -> LvDag:
    """One proxy W shared by two confounders of T -> Y."""
    edges = [(l, v) for l in ("L1", "L2") for v in "WTY"] + [("T", "Y")]
    return LvDag.from_names(["W", "T", "Y"], ["L1", "L2"], edges)


GRAPHS = {
    "iv": iv,
    "proxy": proxy,
    "longitudinal": longitudinal,
    "longitudinal_varying": longitudinal_varying,
    "underspecified_iv": underspecified_iv,
    "g1": g1,
    "g2": g2,
    "g3": g3,
    "g4": g4,
}


def get(name: str) -> LvDag:
    try:
        return GRAPHS[name]()
    except KeyError:
        raise KeyError(f"unknown graph {name!r}; choose from {sorted(GRAPHS)}") from None
