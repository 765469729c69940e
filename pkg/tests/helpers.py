import numpy as np


def unit_bank(rng, k, m, norm=1.0):
    bank = rng.uniform(-1, 1, size=(k, m, m))
    return norm * bank / np.linalg.norm(bank.reshape(k, -1), axis=1)[:, None, None]
