from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """All numerical thresholds used across the package, in one place."""

    gram: float = 1e-10
    eig: float = 1e-9
    herm: float = 1e-12
    entry: float = 1e-8
    lam: float = 1e-9
    couple: float = 1e-9
    hull: float = 1e-9
    drop: float = 1e-12
    zero: float = 1e-9

    def with_(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT_TOL = Tolerances()
