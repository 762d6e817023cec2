import numpy as np
import pytest

from ucbregret.core import BanditSpec


@pytest.fixture(scope="session")
def paper_spec() -> BanditSpec:
    """Three-arm setup used throughout: mu = [1,2,3], beta = 10, c = 0.4."""
    return BanditSpec(
        K=3, T=20, mu=[1.0, 2.0, 3.0], sigma_tilde=[1.0, 1.0, 1.0],
        gamma=0.04, beta=10.0, c=0.4,
    )


@pytest.fixture(scope="session")
def noisy_spec(paper_spec) -> BanditSpec:
    """Same arms at the larger noise level sqrt(gamma) = 0.6."""
    return paper_spec.replace(gamma=0.36)


def deterministic_recursion(spec, argmax=False):
    """Independent oracle: noiseless softmax-UCB (or greedy-UCB) iteration.

    Zero-noise trajectory with rewards pinned at their means; returns
    (n, s) over 0..T and the implied regret.  Written without the package's
    sweep code on purpose.
    """
    K, T = spec.K, spec.T
    n = np.ones((K, T + 1))
    s = np.zeros((K, T + 1))
    s[:, 0] = spec.mu
    for t in range(1, T + 1):
        b = s[:, t - 1] / n[:, t - 1] + spec.c * np.sqrt(
            np.log(K + t - 1) / n[:, t - 1]
        )
        if argmax:
            p = np.zeros(K)
            p[np.argmax(b)] = 1.0
        else:
            e = np.exp(spec.beta * (b - b.max()))
            p = e / e.sum()
        n[:, t] = n[:, t - 1] + p
        s[:, t] = spec.mu * n[:, t]
    regret = (T + K) * spec.mu_star - s[:, T].sum()
    return n, s, regret
