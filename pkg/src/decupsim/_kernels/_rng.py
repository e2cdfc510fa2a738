"""Counter-based random streams (splitmix64 finaliser).

Every (seed, trajectory, fluctuator) triple owns an independent stream; draw
``i`` of a stream is a pure function of the triple and ``i``. Draw 0 fixes
the initial telegraph sign, draws 1, 2, ... give exponential waiting times.
This makes results independent of how trajectories are split over workers.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
TRAJ_SALT = np.uint64(0x632BE59BD9B4E019)
FLUCT_SALT = np.uint64(0x8CB92BA72F3D8DD7)
S30, S27, S31, S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix(z):
    """splitmix64 finaliser on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    return z ^ (z >> S31)


def stream_key(seed: int, traj, fluct):
    s = np.asarray([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    t = np.asarray(traj, dtype=np.uint64)
    k = np.asarray(fluct, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix(mix(mix(s) ^ mix(t + TRAJ_SALT)) ^ mix(k + FLUCT_SALT))


def uniforms(key, index):
    """Uniform doubles in [0, 1) for draw numbers ``index`` of stream ``key``."""
    i = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix(np.asarray(key, dtype=np.uint64) + (i + np.uint64(1)) * GOLDEN)
    return (z >> S11).astype(np.float64) * INV53


def initial_sign(key) -> float:
    return 1.0 if uniforms(key, 0)[0] < 0.5 else -1.0


def switch_times(key, flip_rate: float, t_max: float) -> np.ndarray:
    """Switch times in ``[0, t_max)`` of a telegraph process with the given flip rate.

    Times are accumulated left to right so they agree bit for bit with the
    compiled kernels.
    """
    if flip_rate <= 0:
        return np.empty(0)
    mean = flip_rate * t_max
    block = int(mean + 10.0 * np.sqrt(mean) + 16)
    start = 1
    last = 0.0
    chunks = []
    while True:
        u = uniforms(key, np.arange(start, start + block))
        gaps = -np.log1p(-u) / flip_rate
        times = np.cumsum(np.concatenate(([last], gaps)))[1:]
        inside = times < t_max
        if not inside.all():
            chunks.append(times[inside])
            break
        chunks.append(times)
        last = times[-1]
        start += block
    return np.concatenate(chunks)
