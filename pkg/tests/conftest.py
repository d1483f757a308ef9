import numpy as np

import ewm


def random_spec(rng, n=None, n_min=2, n_max=8):
    """Random anchor with min weight bounded away from 0 and an admissible radius."""
    if n is None:
        n = int(rng.integers(n_min, n_max + 1))
    w = rng.dirichlet(np.ones(n)) * 0.7 + 0.3 / n
    w = w / w.sum()
    delta = float(rng.uniform(0.2, 0.9) * w.min())
    return ewm.make_neighborhood(ewm.make_distribution(w), delta)


def random_target(rng, spec):
    """Random target inside the ball: signed zero-sum shift with ||s||_1 <= delta."""
    z = rng.normal(size=spec.n)
    z -= z.mean()
    z *= float(rng.uniform(0.0, 1.0)) * spec.delta / np.abs(z).sum()
    return ewm.make_distribution(spec.anchor.weights + z)
