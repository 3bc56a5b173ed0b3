import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ris_mismatch.exceptions import InvalidArgumentError
from ris_mismatch.models.ris import AmplitudeModel, PhaseProfile, WeightMode
from ris_mismatch.utils.seeding import generator

logger = logging.getLogger(__name__)


def amplitude(model: AmplitudeModel, theta):
    """β(θ) = (1 − β_min)((sin(θ − φ) + 1)/2)^κ + β_min; скаляр или массив."""
    base = (np.sin(np.asarray(theta, dtype=float) - model.phi) + 1.0) / 2.0
    # sin может чуть выйти за [-1, 1] на уровне округления
    base = np.clip(base, 0.0, 1.0)
    return (1.0 - model.beta_min) * base**model.kappa + model.beta_min


def make_weights(profile: PhaseProfile, model: AmplitudeModel, mode: WeightMode) -> np.ndarray:
    """Комплексные веса RIS T×M: истинные β(θ)e^{jθ} или предполагаемые e^{jθ}."""
    phase = np.exp(1j * profile.theta)
    if mode is WeightMode.ASSUMED:
        return phase
    return amplitude(model, profile.theta) * phase


def random_profile(T: int, M: int, seed: int) -> PhaseProfile:
    """θ_{t,m} i.i.d. равномерно на [−π, π); детерминирован по seed (Philox, счётчиковый)."""
    if T < 1 or M < 1:
        raise InvalidArgumentError(f"profile dimensions must be >= 1, got {T}x{M}")
    theta = generator(seed).uniform(-np.pi, np.pi, size=(T, M))
    # uniform может округлиться ровно до π
    theta[theta >= np.pi] = -np.pi
    return PhaseProfile(theta=theta, seed=seed)


def save_profile(profile: PhaseProfile, path: Path | str) -> None:
    """.npy: бинарно; иначе CSV с колонками t, m, theta (сид в строке-комментарии)."""
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, profile.theta)
        path.with_suffix(".seed").write_text(str(profile.seed), encoding="utf-8")
        return
    T, M = profile.theta.shape
    t_idx, m_idx = np.meshgrid(np.arange(T), np.arange(M), indexing="ij")
    frame = pd.DataFrame({"t": t_idx.ravel(), "m": m_idx.ravel(), "theta": profile.theta.ravel()})
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# seed={profile.seed}\n")
        frame.to_csv(fh, index=False, float_format="%.17g")
    logger.debug(f"Profile {T}x{M} (seed {profile.seed}) saved to {path}")


def load_profile(path: Path | str) -> PhaseProfile:
    path = Path(path)
    if path.suffix == ".npy":
        seed_file = path.with_suffix(".seed")
        seed = int(seed_file.read_text(encoding="utf-8")) if seed_file.exists() else 0
        return PhaseProfile(theta=np.load(path), seed=seed)
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
    seed = int(first.split("=", 1)[1]) if first.startswith("# seed=") else 0
    frame = pd.read_csv(path, comment="#")
    T, M = int(frame["t"].max()) + 1, int(frame["m"].max()) + 1
    theta = np.empty((T, M))
    theta[frame["t"].to_numpy(), frame["m"].to_numpy()] = frame["theta"].to_numpy()
    return PhaseProfile(theta=theta, seed=seed)
