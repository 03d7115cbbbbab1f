"""Run configuration loaded from a TOML file.

Example::

    [model]
    lengths = [1.0]
    # optional, one list of [width, value] pairs per direction:
    # potentials = [[[0.5, 0.0], [0.5, 2.0]]]

    [maryland]
    g = 1.0
    omega = [0.6180339887498949]
    phi = 0.0

    [compute]
    window = [0.1, 9.5]
    index_radius = 4

    [output]
    directory = "out"
    format = "csv"
"""
from dataclasses import asdict, dataclass, field
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .edge_solver import EdgeProfile
from .errors import InputError
from .lattice_model import GraphModel, MarylandParams

FORMATS = ("csv", "json")
DEFECT_BOX = {1: 32, 2: 6, 3: 2}


@dataclass
class ComputeBlock:
    window: tuple = (0.1, 9.5)
    index_radius: int = 4
    box_radius: int = None
    defect_box: int = None
    check_radius: int = 64
    sigma_tol: float = 1e-12
    lambda_tol: float = 1e-12
    residual_tol: float = 1e-6
    grid_cap: int = 4096
    samples: int = 200
    defect_grid: int = 400


@dataclass
class OutputBlock:
    directory: str = "out"
    format: str = "csv"


@dataclass
class RunConfig:
    lengths: tuple
    potentials: tuple
    g: float
    omega: tuple
    phi: float
    compute: ComputeBlock = field(default_factory=ComputeBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @classmethod
    def from_dict(cls, data):
        try:
            model = data["model"]
            mary = data["maryland"]
        except KeyError as exc:
            raise InputError(f"config is missing the [{exc.args[0]}] block") from None
        if "lengths" not in model:
            raise InputError("[model] needs 'lengths'")
        lengths = tuple(float(x) for x in model["lengths"])
        if "d" in model and int(model["d"]) != len(lengths):
            raise InputError(f"[model] d={model['d']} but {len(lengths)} lengths given")
        potentials = model.get("potentials")
        if potentials is None:
            potentials = tuple(((l, 0.0),) for l in lengths)
        else:
            if len(potentials) != len(lengths):
                raise InputError("[model] potentials must list one profile per direction")
            potentials = tuple(tuple((float(w), float(v)) for w, v in p) for p in potentials)
        for key in ("g", "omega"):
            if key not in mary:
                raise InputError(f"[maryland] needs '{key}'")
        compute = ComputeBlock(**_known(data.get("compute", {}), ComputeBlock, "compute"))
        output = OutputBlock(**_known(data.get("output", {}), OutputBlock, "output"))
        cfg = cls(lengths, potentials, float(mary["g"]),
                  tuple(float(w) for w in mary["omega"]), float(mary.get("phi", 0.0)),
                  compute, output)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"invalid TOML in {path}: {exc}") from None
        return cls.from_dict(data)

    def validate(self):
        model = self.model()
        params = self.params()
        if params.d != model.d:
            raise InputError(f"omega has {params.d} entries but the model has d={model.d}")
        c = self.compute
        window = tuple(float(x) for x in c.window)
        if len(window) != 2 or not window[0] < window[1]:
            raise InputError(f"compute.window must be [a, b] with a < b, got {c.window}")
        c.window = window
        for name in ("sigma_tol", "lambda_tol", "residual_tol"):
            if not getattr(c, name) > 0:
                raise InputError(f"compute.{name} must be positive")
        for name in ("index_radius",):
            if getattr(c, name) < 0:
                raise InputError(f"compute.{name} must be non-negative")
        for name in ("check_radius", "samples", "defect_grid", "grid_cap"):
            if getattr(c, name) < 1:
                raise InputError(f"compute.{name} must be positive")
        if self.output.format not in FORMATS:
            raise InputError(f"output.format must be one of {FORMATS}, got {self.output.format!r}")

    def model(self):
        return GraphModel(tuple(EdgeProfile(l, p) for l, p in zip(self.lengths, self.potentials)))

    def params(self):
        return MarylandParams(self.g, self.omega, self.phi)

    @property
    def defect_box(self):
        return self.compute.defect_box or DEFECT_BOX[len(self.lengths)]

    def as_dict(self):
        return asdict(self)

    def digest(self):
        """SHA-256 of the canonical JSON form of the configuration."""
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _known(block, cls, name):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(block) - allowed
    if unknown:
        raise InputError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return dict(block)
