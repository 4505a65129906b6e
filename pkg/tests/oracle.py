"""Independent Monte Carlo references shared by the tests."""
import numpy as np


def mc_max_moments(mus, variances, n, seed, chunk=1_000_000):
    """Mean, variance and their standard errors of the max of independent Normals.

    Sampled in chunks so 10^7 draws fit in modest memory.
    """
    rng = np.random.default_rng(seed)
    mus = np.asarray(mus, dtype=float)
    sds = np.sqrt(np.asarray(variances, dtype=float))
    s1 = s2 = s3 = s4 = 0.0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        m = (mus + sds * rng.standard_normal((k, len(mus)))).max(axis=1)
        s1 += m.sum()
        s2 += (m * m).sum()
        s3 += (m ** 3).sum()
        s4 += (m ** 4).sum()
        done += k
    e1, e2, e3, e4 = s1 / n, s2 / n, s3 / n, s4 / n
    var = e2 - e1 * e1
    central4 = e4 - 4 * e3 * e1 + 6 * e2 * e1 ** 2 - 3 * e1 ** 4
    se_mean = np.sqrt(var / n)
    se_var = np.sqrt(max(central4 - var * var, 0.0) / n)
    return e1, var, se_mean, se_var


def mc_argmax_frequencies(mus, variances, n, seed):
    rng = np.random.default_rng(seed)
    draws = rng.normal(mus, np.sqrt(variances), size=(n, len(mus)))
    return np.bincount(draws.argmax(axis=1), minlength=len(mus)) / n
