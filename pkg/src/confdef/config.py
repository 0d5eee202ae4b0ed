from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used by verdicts.

    ``algebraic`` bounds identities that hold exactly up to round-off and
    ``identity`` the closed-form ones (determinants, Vieta).  Discretisation
    residuals are judged against ``disc_const * h**2``.  ``distinct`` is the
    smallest distance at which two triples count as different.
    """

    algebraic: float = 1e-10
    identity: float = 1e-12
    disc_const: float = 10.0
    gap_rel: float = 1e-2
    cond_max: float = 1e8
    lightcone: float = 1e-6
    margin_floor: float = 1e-10
    distinct: float = 1e-3

    def disc(self, h):
        return self.disc_const * h * h

    def scaled(self, factor):
        return replace(
            self,
            algebraic=self.algebraic * factor,
            identity=self.identity * factor,
            disc_const=self.disc_const * factor,
            lightcone=self.lightcone * factor,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT = Tolerances()


DEFAULT_CANDIDATES = (
    {"kind": "hyperbolic", "U": "const 1", "V": "const_V 1", "label": "V=1", "expect": "member"},
    {"kind": "hyperbolic", "U": "const 1", "V": "const_V 2", "label": "V=2", "expect": "member"},
    {"kind": "hyperbolic", "U": {"U_from_lambda": 2.0}, "V": "poly 1 0 1", "label": "U=2-exp(-2lam)/2", "expect": "member"},
    {"kind": "hyperbolic", "U": "poly 1 0 1", "V": "poly 1 0 1", "label": "U=1+u^2, V=1+v^2", "expect": "non-member"},
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run depends on; two equal configs give identical JSON.

    The surface grid (``surface_h``, ``surface_half_width``) drives the
    gallery and membership checks.  The M-grid (``h``, ``counts``,
    ``leaf_counts``) drives triples, lifts and the deformation.
    """

    n: int = 6
    variant: str = "generic"
    rate: float = 0.5
    surface_h: float = 0.01
    surface_half_width: float = 0.5
    h: float = 0.05
    counts: int = 32
    leaf_counts: tuple = None
    fd_order: int = 4
    surface_margin: int = 2
    lifted_margin: int = 4
    candidates: tuple = DEFAULT_CANDIDATES
    candidate: str = None
    tolerances: Tolerances = DEFAULT
    seed: int = 0

    def __post_init__(self):
        if self.leaf_counts is None:
            object.__setattr__(self, "leaf_counts", (8,) + (5,) * (self.n - 3))
        object.__setattr__(self, "leaf_counts", tuple(int(c) for c in self.leaf_counts))
        object.__setattr__(self, "candidates", tuple(dict(c) for c in self.candidates))
        problems = []
        if self.n < 3:
            problems.append("n must be at least 3")
        if len(self.leaf_counts) != self.n - 2:
            problems.append(f"leaf_counts needs {self.n - 2} entries")
        if self.counts < 5 or min(self.leaf_counts, default=5) < 5:
            problems.append("resolutions must be at least 5 per axis")
        if round(2 * self.surface_half_width / self.surface_h) + 1 < 5:
            problems.append("surface grid has fewer than 5 samples per axis")
        if not (self.h > 0 and self.surface_h > 0 and self.surface_half_width > 0):
            problems.append("grid spacings and widths must be positive")
        if self.fd_order not in (2, 4):
            problems.append("fd_order must be 2 or 4")
        if min(self.tolerances.to_dict().values()) <= 0:
            problems.append("tolerances must be positive")
        if not self.candidates:
            problems.append("at least one candidate is needed")
        for c in self.candidates:
            if c.get("expect", "member") not in ("member", "non-member"):
                problems.append(f"candidate expect must be 'member' or 'non-member', got {c.get('expect')!r}")
        if problems:
            raise ValueError("invalid config: " + "; ".join(problems))

    def with_tol_scale(self, factor):
        if not factor > 0:
            raise ValueError("--tol-scale must be positive")
        return replace(self, tolerances=self.tolerances.scaled(factor))

    def to_dict(self):
        out = asdict(self)
        out["leaf_counts"] = list(self.leaf_counts)
        out["candidates"] = [dict(c) for c in self.candidates]
        out["tolerances"] = self.tolerances.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"invalid config: unknown keys {sorted(unknown)}")
        try:
            if isinstance(data.get("tolerances"), dict):
                data["tolerances"] = Tolerances.from_dict(data["tolerances"])
            return cls(**data)
        except TypeError as exc:
            raise ValueError(f"invalid config: {exc}") from exc
