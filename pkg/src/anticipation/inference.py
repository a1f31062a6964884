"""Monte-Carlo dropout prediction.

Running the network T times with freshly sampled dropout masks yields T
posterior samples of its outputs.  Their average approximates the
predictive expectation (regression) and predictive posterior (class
probabilities); spread across samples gives the epistemic variance, and
the mean multinomial variance p(1-p) of the softmax samples gives the
aleatoric class variance.  All variances use the population 1/T form.

Per-sample seeds are ``seed ^ sample_index``, so a parallel execution of
the T passes would aggregate to the identical summary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .labels import ANTICIPATING
from .network import DropoutMasks, NetworkConfig, Params, forward, sample_masks, softmax


@dataclass
class PredictiveSummary:
    """MC aggregates per frame and instrument.

    Class variances come in a class-averaged form (the headline uncertainty
    numbers) and a per-class form kept for analyses that look at a single
    class.  ``reg_samples``/``class_samples`` are retained when requested.
    """

    samples: int
    horizon: float
    reg_mean: np.ndarray                 # (n, K) minutes
    reg_epistemic_var: np.ndarray        # (n, K) minutes^2
    class_mean: np.ndarray               # (n, K, 3)
    class_epistemic_var: np.ndarray      # (n, K), averaged over classes
    class_aleatoric_var: np.ndarray      # (n, K), averaged over classes
    class_epistemic_per_class: np.ndarray  # (n, K, 3)
    class_aleatoric_per_class: np.ndarray  # (n, K, 3)
    reg_samples: Optional[np.ndarray] = None    # (T, n, K)
    class_samples: Optional[np.ndarray] = None  # (T, n, K, 3)

    @property
    def n_frames(self) -> int:
        return self.reg_mean.shape[0]

    @property
    def n_instruments(self) -> int:
        return self.reg_mean.shape[1]


def aggregate_samples(
    reg_samples: np.ndarray,
    class_samples: np.ndarray,
    horizon: float,
    keep_samples: bool = False,
) -> PredictiveSummary:
    """Reduce raw MC samples to a :class:`PredictiveSummary`.

    ``reg_samples`` is (T, n, K) regression values in minutes,
    ``class_samples`` is (T, n, K, 3) softmax probabilities.
    """
    t = reg_samples.shape[0]
    reg_mean = reg_samples.mean(axis=0)
    reg_var = np.square(reg_samples - reg_mean).mean(axis=0)
    class_mean = class_samples.mean(axis=0)
    epi_pc = np.square(class_samples - class_mean).mean(axis=0)
    alea_pc = (class_samples * (1.0 - class_samples)).mean(axis=0)
    return PredictiveSummary(
        samples=t,
        horizon=horizon,
        reg_mean=reg_mean,
        reg_epistemic_var=reg_var,
        class_mean=class_mean,
        class_epistemic_var=epi_pc.mean(axis=2),
        class_aleatoric_var=alea_pc.mean(axis=2),
        class_epistemic_per_class=epi_pc,
        class_aleatoric_per_class=alea_pc,
        reg_samples=reg_samples if keep_samples else None,
        class_samples=class_samples if keep_samples else None,
    )


def mc_predict(
    params: Params,
    config: NetworkConfig,
    features: np.ndarray,
    samples: int = 10,
    seed: int = 0,
    keep_samples: bool = False,
) -> PredictiveSummary:
    """Draw ``samples`` mask sets and aggregate the resulting forward passes.

    Regression samples are clamped to ``[0, horizon]`` before aggregation
    (the clamp policy of ``linear_clamped`` mode; a no-op for
    ``scaled_sigmoid``).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    k = config.instruments
    reg = np.empty((samples, n, k))
    cls = np.empty((samples, n, k, 3))
    for t in range(samples):
        masks: DropoutMasks = sample_masks(config, seed ^ t)
        outputs, _ = forward(params, masks, features, config)
        reg[t] = np.clip(outputs.regression, 0.0, config.horizon)
        cls[t] = softmax(outputs.class_logits)
    return aggregate_samples(reg, cls, config.horizon, keep_samples=keep_samples)


def anticipating_mask(
    summary: PredictiveSummary,
    horizon: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (n, K) masks of anticipating predictions.

    Regression: mean prediction strictly inside (0.1 h, 0.9 h).
    Classification: argmax of the mean class probabilities is the
    anticipating class (ties resolve in class order, anticipating first).
    """
    h = summary.horizon if horizon is None else horizon
    reg_mask = (summary.reg_mean > 0.1 * h) & (summary.reg_mean < 0.9 * h)
    cls_mask = summary.class_mean.argmax(axis=2) == ANTICIPATING
    return reg_mask, cls_mask


# ---------------------------------------------------------------------------
# Serialization: CSV (one row per frame x instrument) and a binary variant
# ---------------------------------------------------------------------------

_CSV_COLUMNS = (
    "frame", "instrument", "reg_mean", "reg_epistemic_var",
    "p_anticipating", "p_present", "p_background",
    "class_epistemic_var", "class_aleatoric_var",
    "epi_anticipating", "epi_present", "epi_background",
    "alea_anticipating", "alea_present", "alea_background",
)


def save_summary_csv(summary: PredictiveSummary, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("samples", summary.samples, "horizon", repr(summary.horizon)))
        writer.writerow(_CSV_COLUMNS)
        for i in range(summary.n_frames):
            for j in range(summary.n_instruments):
                writer.writerow(
                    (i, j)
                    + tuple(
                        repr(float(v)) for v in (
                            summary.reg_mean[i, j], summary.reg_epistemic_var[i, j],
                            *summary.class_mean[i, j],
                            summary.class_epistemic_var[i, j], summary.class_aleatoric_var[i, j],
                            *summary.class_epistemic_per_class[i, j],
                            *summary.class_aleatoric_per_class[i, j],
                        )
                    )
                )


def load_summary_csv(path: str) -> PredictiveSummary:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        meta = next(reader)
        samples, horizon = int(meta[1]), float(meta[3])
        header = next(reader)
        if tuple(header) != _CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected summary columns")
        rows = [(int(r[0]), int(r[1]), *map(float, r[2:])) for r in reader]
    if not rows:
        raise ValueError(f"{path}: summary has no rows")
    n = max(r[0] for r in rows) + 1
    k = max(r[1] for r in rows) + 1
    out = {
        "reg_mean": np.zeros((n, k)), "reg_epistemic_var": np.zeros((n, k)),
        "class_mean": np.zeros((n, k, 3)),
        "class_epistemic_var": np.zeros((n, k)), "class_aleatoric_var": np.zeros((n, k)),
        "class_epistemic_per_class": np.zeros((n, k, 3)),
        "class_aleatoric_per_class": np.zeros((n, k, 3)),
    }
    for row in rows:
        i, j, values = row[0], row[1], row[2:]
        out["reg_mean"][i, j], out["reg_epistemic_var"][i, j] = values[0], values[1]
        out["class_mean"][i, j] = values[2:5]
        out["class_epistemic_var"][i, j] = values[5]
        out["class_aleatoric_var"][i, j] = values[6]
        out["class_epistemic_per_class"][i, j] = values[7:10]
        out["class_aleatoric_per_class"][i, j] = values[10:13]
    return PredictiveSummary(samples=samples, horizon=horizon, **out)


def save_summary_npz(summary: PredictiveSummary, path: str) -> None:
    np.savez_compressed(
        path,
        samples=summary.samples,
        horizon=summary.horizon,
        reg_mean=summary.reg_mean,
        reg_epistemic_var=summary.reg_epistemic_var,
        class_mean=summary.class_mean,
        class_epistemic_var=summary.class_epistemic_var,
        class_aleatoric_var=summary.class_aleatoric_var,
        class_epistemic_per_class=summary.class_epistemic_per_class,
        class_aleatoric_per_class=summary.class_aleatoric_per_class,
    )


def load_summary_npz(path: str) -> PredictiveSummary:
    with np.load(path) as data:
        return PredictiveSummary(
            samples=int(data["samples"]),
            horizon=float(data["horizon"]),
            reg_mean=data["reg_mean"],
            reg_epistemic_var=data["reg_epistemic_var"],
            class_mean=data["class_mean"],
            class_epistemic_var=data["class_epistemic_var"],
            class_aleatoric_var=data["class_aleatoric_var"],
            class_epistemic_per_class=data["class_epistemic_per_class"],
            class_aleatoric_per_class=data["class_aleatoric_per_class"],
        )
