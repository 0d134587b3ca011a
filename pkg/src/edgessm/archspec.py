"""Mamba variant configurations and parameter accounting.

Parameter inventory per layer (D = d_model, Di = expand * D, N = d_state,
K = d_conv, r = dt_rank, H = n_heads, R = mimo_rank, Xw = R * Di):

Mamba-1
    norm                 D
    in_proj  D -> 2 Di   D * 2Di
    conv1d (depthwise)   K * Di + Di
    x_proj   Di -> r+2N  Di * (r + 2N)
    dt_proj  r -> Di     r * Di + Di
    A                    Di * N
    D (skip)             Di
    out_proj Di -> D     Di * D

Mamba-2
    norm                 D
    in_proj              D * (2Di + 2N + H)      (z, x, B, C, dt)
    conv1d on (x, B, C)  K * (Di + 2N) + (Di + 2N)
    dt_bias, A, D        3H
    gated norm           Di
    out_proj             Di * D

Mamba-3 (MIMO rank R)
    norm                 D
    in_proj              D * (2Xw + 2NR + H)     (z, X, B, C, dt)
    dt_bias, A, D        3H
    gated norm           Xw
    out_proj             Xw * D

The MIMO input X and gate z are R * Di wide, so halving d_model at R = 4
keeps the per-layer projection parameters unchanged. Mamba-3 has no short
convolution. When ``vocab_size > 0`` a tied embedding (V * D) and the final
norm (D) are added once per model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

WIDTH_GRANULARITY = 8


class ConfigError(ValueError):
    """Raised for an invalid or inconsistent configuration."""


class MatchingError(RuntimeError):
    """Raised when a parameter-matched width cannot be found."""


class VariantKind(enum.Enum):
    MAMBA1 = "mamba1"
    MAMBA2 = "mamba2"
    MAMBA3 = "mamba3"

    @property
    def label(self) -> str:
        return {"mamba1": "Mamba-1", "mamba2": "Mamba-2", "mamba3": "Mamba-3"}[self.value]


class Formulation(enum.Enum):
    SEQUENTIAL = "sequential"
    PSCAN = "pscan"
    SSD = "ssd"

    @property
    def label(self) -> str:
        return {"sequential": "sequential", "pscan": "pscan", "ssd": "SSD"}[self.value]


def formulation_allowed(variant: VariantKind, formulation: Formulation) -> bool:
    if formulation is Formulation.PSCAN:
        return variant is VariantKind.MAMBA1
    if formulation is Formulation.SSD:
        return variant in (VariantKind.MAMBA2, VariantKind.MAMBA3)
    return True


@dataclass(frozen=True)
class ModelConfig:
    variant: VariantKind
    d_model: int
    n_layers: int
    d_state: int
    expand: float = 2.0
    d_conv: int = 4
    dt_rank: int = 1
    n_heads: int = 1
    head_dim: int = 1
    mimo_rank: int = 1
    vocab_size: int = 0

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", VariantKind(self.variant))
        for name in ("d_model", "d_state", "d_conv", "dt_rank", "n_heads", "head_dim", "mimo_rank"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_layers < 0:
            raise ConfigError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.vocab_size < 0:
            raise ConfigError(f"vocab_size must be >= 0, got {self.vocab_size}")
        if self.expand <= 0:
            raise ConfigError(f"expand must be positive, got {self.expand}")
        inner = self.expand * self.d_model
        if abs(inner - round(inner)) > 1e-9:
            raise ConfigError(f"expand * d_model must be an integer, got {inner}")
        if self.n_heads * self.head_dim != self.d_inner:
            raise ConfigError(
                f"n_heads * head_dim ({self.n_heads} * {self.head_dim}) must equal "
                f"expand * d_model ({self.d_inner})"
            )
        if self.variant is VariantKind.MAMBA1 and self.n_heads != 1:
            raise ConfigError("n_heads must be 1 for mamba1")
        if self.variant is not VariantKind.MAMBA3 and self.mimo_rank != 1:
            raise ConfigError("mimo_rank must be 1 unless variant is mamba3")

    @property
    def d_inner(self) -> int:
        return int(round(self.expand * self.d_model))

    @property
    def mimo_width(self) -> int:
        """Width of the x / z / y streams (R * d_inner)."""
        return self.mimo_rank * self.d_inner

    @property
    def state_size(self) -> int:
        """Recurrent state elements per layer."""
        return self.d_inner * self.d_state

    # -- constructors using the family conventions --

    @classmethod
    def mamba1(cls, d_model: int, n_layers: int, d_state: int = 16, *, expand: float = 2.0,
               d_conv: int = 4, dt_rank: int | None = None, vocab_size: int = 0) -> "ModelConfig":
        inner = int(round(expand * d_model))
        return cls(VariantKind.MAMBA1, d_model, n_layers, d_state, expand, d_conv,
                   dt_rank if dt_rank is not None else math.ceil(d_model / 16),
                   1, inner, 1, vocab_size)

    @classmethod
    def mamba2(cls, d_model: int, n_layers: int, d_state: int = 128, *, expand: float = 2.0,
               d_conv: int = 4, head_dim: int = 64, vocab_size: int = 0) -> "ModelConfig":
        inner = int(round(expand * d_model))
        if inner % head_dim:
            raise ConfigError(f"d_inner {inner} not divisible by head_dim {head_dim}")
        return cls(VariantKind.MAMBA2, d_model, n_layers, d_state, expand, d_conv,
                   1, inner // head_dim, head_dim, 1, vocab_size)

    @classmethod
    def mamba3(cls, d_model: int, n_layers: int, d_state: int = 128, *, mimo_rank: int = 4,
               expand: float = 2.0, d_conv: int = 4, head_dim: int = 64,
               vocab_size: int = 0) -> "ModelConfig":
        inner = int(round(expand * d_model))
        if inner % head_dim:
            raise ConfigError(f"d_inner {inner} not divisible by head_dim {head_dim}")
        return cls(VariantKind.MAMBA3, d_model, n_layers, d_state, expand, d_conv,
                   1, inner // head_dim, head_dim, mimo_rank, vocab_size)

    @classmethod
    def for_variant(cls, variant: VariantKind, d_model: int, n_layers: int, **kw) -> "ModelConfig":
        factory = {VariantKind.MAMBA1: cls.mamba1, VariantKind.MAMBA2: cls.mamba2,
                   VariantKind.MAMBA3: cls.mamba3}[variant]
        return factory(d_model, n_layers, **kw)


def layer_param_count(config: ModelConfig) -> int:
    D, Di, N, K = config.d_model, config.d_inner, config.d_state, config.d_conv
    H, R = config.n_heads, config.mimo_rank
    if config.variant is VariantKind.MAMBA1:
        r = config.dt_rank
        return (D + D * 2 * Di + K * Di + Di + Di * (r + 2 * N) + r * Di + Di
                + Di * N + Di + Di * D)
    if config.variant is VariantKind.MAMBA2:
        conv_ch = Di + 2 * N
        return D + D * (2 * Di + 2 * N + H) + K * conv_ch + conv_ch + 3 * H + Di + Di * D
    Xw = R * Di
    return D + D * (2 * Xw + 2 * N * R + H) + 3 * H + Xw + Xw * D


def param_count(config: ModelConfig) -> int:
    """Total parameters of ``config`` (see the module docstring for the inventory)."""
    total = config.n_layers * layer_param_count(config)
    if config.vocab_size > 0:
        total += config.vocab_size * config.d_model + config.d_model
    return total


def attention_crossover(d_model: int) -> int:
    """Sequence length above which linear-time SSM arithmetic beats attention."""
    if d_model < 1:
        raise ConfigError("d_model must be >= 1")
    return 6 * d_model


def width_quantum(variant: VariantKind, head_dim: int, expand: float = 2.0,
                  granularity: int = WIDTH_GRANULARITY) -> int:
    """Smallest multiple of ``granularity`` whose inner width splits into whole heads."""
    q = granularity
    if variant is VariantKind.MAMBA1:
        step = q
        while abs(expand * step - round(expand * step)) > 1e-9:
            step += q
        return step
    step = q
    while True:
        inner = expand * step
        if abs(inner - round(inner)) < 1e-9 and int(round(inner)) % head_dim == 0:
            return step
        step += q


def round_to_quantum(value: float, quantum: int) -> int:
    return max(quantum, int(round(value / quantum)) * quantum)


def _variant_kwargs(variant: VariantKind, reference: ModelConfig, d_state, head_dim, mimo_rank):
    kw = {"d_state": d_state if d_state is not None else reference.d_state,
          "vocab_size": reference.vocab_size, "expand": reference.expand,
          "d_conv": reference.d_conv}
    if variant is not VariantKind.MAMBA1:
        if head_dim is None:
            head_dim = reference.head_dim if reference.variant is not VariantKind.MAMBA1 else 64
        kw["head_dim"] = head_dim
    if variant is VariantKind.MAMBA3:
        kw["mimo_rank"] = mimo_rank if mimo_rank is not None else 4
    return kw


def match_param_count(variant: VariantKind, reference: ModelConfig, *, tolerance: float = 0.02,
                      granularity: int = WIDTH_GRANULARITY, d_state: int | None = None,
                      head_dim: int | None = None, mimo_rank: int | None = None,
                      max_width: int = 65536) -> ModelConfig:
    """Return a ``variant`` config with the parameter count of ``reference``.

    Mamba-3 takes the width ``reference.d_model / sqrt(R)`` (rounded to the
    width quantum) and only the depth is adjusted if the count is off by more
    than ``tolerance``. Other variants keep the reference depth and binary
    search the width.
    """
    target = param_count(reference)
    if target == 0:
        raise MatchingError("reference has zero parameters")
    kw = _variant_kwargs(variant, reference, d_state, head_dim, mimo_rank)
    quantum = width_quantum(variant, kw.get("head_dim", 1), kw["expand"], granularity)

    def build(d_model: int, n_layers: int) -> ModelConfig:
        return ModelConfig.for_variant(variant, d_model, n_layers, **kw)

    def rel_err(cfg: ModelConfig) -> float:
        return param_count(cfg) / target - 1.0

    if variant is VariantKind.MAMBA3:
        d_model = round_to_quantum(reference.d_model / math.sqrt(kw["mimo_rank"]), quantum)
        cfg = build(d_model, reference.n_layers)
        if abs(rel_err(cfg)) <= tolerance:
            return cfg
        per_layer = layer_param_count(cfg)
        fixed = param_count(build(d_model, 0))
        n_layers = max(1, int(round((target - fixed) / per_layer)))
        cfg = build(d_model, n_layers)
        if abs(rel_err(cfg)) <= tolerance:
            return cfg
        raise MatchingError(
            f"mamba3 at d_model={d_model} cannot reach {target} params within "
            f"{tolerance:.1%} by depth (best {param_count(cfg)} at {n_layers} layers)")

    lo, hi = 1, max(1, max_width // quantum)
    if param_count(build(hi * quantum, reference.n_layers)) < target:
        raise MatchingError(
            f"{variant.value}: {target} params not reachable with d_model <= {hi * quantum}")
    while lo < hi:
        mid = (lo + hi) // 2
        if param_count(build(mid * quantum, reference.n_layers)) < target:
            lo = mid + 1
        else:
            hi = mid
    candidates = [build(k * quantum, reference.n_layers) for k in (lo - 1, lo) if k >= 1]
    best = min(candidates, key=lambda c: abs(rel_err(c)))
    if abs(rel_err(best)) > tolerance:
        raise MatchingError(
            f"{variant.value}: closest width d_model={best.d_model} gives {param_count(best)} "
            f"params, outside {tolerance:.1%} of {target} (search bounds {quantum}..{max_width})")
    return best


# -- config files ---------------------------------------------------------------------------

_INT_FIELDS = {"d_model", "n_layers", "d_state", "d_conv", "dt_rank", "n_heads", "head_dim",
               "mimo_rank", "vocab_size"}


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse a flat ``key = value`` document; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        out[key] = value
    return out


def config_from_dict(values: dict[str, str], source: str = "<string>") -> ModelConfig:
    known = {f.name for f in fields(ModelConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"{source}: unknown key '{sorted(unknown)[0]}'")
    missing = {"variant", "d_model", "n_layers", "d_state"} - set(values)
    if missing:
        raise ConfigError(f"{source}: missing key '{sorted(missing)[0]}'")
    kw: dict[str, object] = {}
    for key, value in values.items():
        try:
            if key == "variant":
                kw[key] = VariantKind(value.lower())
            elif key in _INT_FIELDS:
                kw[key] = int(value)
            else:
                kw[key] = float(value)
        except ValueError:
            raise ConfigError(f"{source}: invalid value for key '{key}': {value!r}") from None
    variant = kw["variant"]
    inner = float(kw.get("expand", 2.0)) * int(kw["d_model"])
    if "n_heads" not in kw and "head_dim" not in kw:
        if variant is VariantKind.MAMBA1:
            kw["n_heads"], kw["head_dim"] = 1, int(round(inner))
        else:
            kw["head_dim"] = 64
    if "n_heads" not in kw:
        kw["n_heads"] = max(1, int(round(inner)) // int(kw["head_dim"]))
    if "head_dim" not in kw:
        kw["head_dim"] = max(1, int(round(inner)) // int(kw["n_heads"]))
    if variant is VariantKind.MAMBA1 and "dt_rank" not in kw:
        kw["dt_rank"] = math.ceil(int(kw["d_model"]) / 16)
    try:
        return ModelConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> ModelConfig:
    path = Path(path)
    return config_from_dict(parse_kv(path.read_text(), str(path)), str(path))


def dump_config(config: ModelConfig, comment: str | None = None) -> str:
    lines = [f"# {line}" for line in comment.splitlines()] if comment else []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, VariantKind):
            value = value.value
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def with_layers(config: ModelConfig, n_layers: int) -> ModelConfig:
    return replace(config, n_layers=n_layers)
