"""
Modeled inference cost: run counters, the FLOPs ledger and the cost report.

All FLOPs here are analytic counts (a linear layer costs ``2·in·out``, activations
one per element, layer norm five per element), not measurements. The spatial cost
per frame is a declared constant of the spatial encoder.
"""
import threading
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Sequence, Union

COMPONENTS = ("spatial", "temporal", "policy", "integration", "classifier")


class RunTrace:
    """
    Counters of the work done while running episodes.

    Locators of one video may step concurrently, so increments take a lock.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.videos = 0
        self.frames = 0
        self.spatial_flops = 0.0
        self.temporal_steps = 0
        self.policy_calls = 0
        self.integrations = 0

    def charge_frame(self, cost: float, n: int = 1):
        with self._lock:
            self.frames += n
            self.spatial_flops += cost * n

    def charge_temporal(self, n: int = 1):
        with self._lock:
            self.temporal_steps += n

    def charge_policy(self, n: int = 1):
        with self._lock:
            self.policy_calls += n

    def charge_integration(self, n: int = 1):
        with self._lock:
            self.integrations += n

    def charge_video(self, n: int = 1):
        with self._lock:
            self.videos += n

    def as_dict(self) -> Dict[str, float]:
        return {
            "videos": self.videos,
            "frames": self.frames,
            "spatial_flops": self.spatial_flops,
            "temporal_steps": self.temporal_steps,
            "policy_calls": self.policy_calls,
            "integrations": self.integrations,
        }


@dataclass(frozen=True)
class CostModel:
    """Analytic FLOPs of one unit of work of each component."""

    spatial_per_frame: float
    temporal_per_step: float
    policy_per_call: float
    integration_per_call: float
    classifier_per_call: float
    spatial_note: str = ""


def flops_ledger(trace: RunTrace, model: CostModel) -> Dict[str, float]:
    """Mean FLOPs per video of each component, plus their exact sum as ``flops_total``."""
    if trace.videos < 1:
        raise ValueError("the trace holds no completed video")
    n = trace.videos
    out = {
        "flops_spatial": trace.frames * model.spatial_per_frame / n,
        "flops_temporal": trace.temporal_steps * model.temporal_per_step / n,
        "flops_policy": trace.policy_calls * model.policy_per_call / n,
        "flops_integration": trace.integrations * model.integration_per_call / n,
        "flops_classifier": trace.integrations * model.classifier_per_call / n,
    }
    out["flops_total"] = _total(out)
    return out


def _total(parts: Dict[str, float]) -> float:
    return sum(parts[f"flops_{c}"] for c in COMPONENTS)


def frame_rate(frames_mean: float, basis: float = 120) -> float:
    """Mean frames observed per video as a fraction of ``basis`` frames."""
    if basis <= 0:
        raise ValueError(f"frame-rate basis must be positive, got {basis}")
    return frames_mean / basis


@dataclass
class CostReport:
    """
    Accuracy and modeled cost of one evaluation.

    ``flops_total`` is derived from the components on construction and always
    equals their sum exactly.
    """

    top1: float
    mAP: float
    frame_rate: float
    frames_mean: float
    flops_spatial: float
    flops_temporal: float
    flops_policy: float
    flops_integration: float
    flops_classifier: float
    flops_total: float = field(init=False)

    def __post_init__(self):
        self.flops_total = _total(vars(self))
        for name in ("top1", "mAP", "frame_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name}={getattr(self, name)} is not a fraction")

    @property
    def gflops(self) -> float:
        return self.flops_total / 1e9

    def to_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self, header: Sequence[str] = ()) -> str:
        """Fixed-key ``key=value`` lines with reals at 6 significant digits.

        Lines of ``header`` are written first as ``#`` comments.
        """
        lines = [f"# {h}" for h in header]
        lines += [f"{k}={v:.6g}" for k, v in self.to_dict().items()]
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path], header: Sequence[str] = ()):
        Path(path).write_text(self.to_text(header))

    @classmethod
    def from_text(cls, text: str) -> "CostReport":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = float(val)
        names = [f.name for f in fields(cls) if f.init]
        missing = [n for n in names if n not in values]
        if missing:
            raise ValueError(f"cost report lacks keys {missing}")
        return cls(**{n: values[n] for n in names})

    @classmethod
    def read(cls, path: Union[str, Path]) -> "CostReport":
        return cls.from_text(Path(path).read_text())
