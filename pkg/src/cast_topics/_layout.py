"""Numba kernels for the embedding layout optimizer.

Single-threaded and seeded: given the same inputs and rng state the
layout is reproducible bit-for-bit.
"""

import numba


@numba.njit(cache=True)
def _clip(val):
    if val > 4.0:
        return 4.0
    if val < -4.0:
        return -4.0
    return val


@numba.njit(cache=True)
def _rdist(x, y):
    d = 0.0
    for i in range(x.shape[0]):
        diff = x[i] - y[i]
        d += diff * diff
    return d


@numba.njit(cache=True)
def _tau_rand_int(state):
    # three-component Tausworthe generator over 32-bit lanes held in int64
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
    )
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
    )
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
    )
    return state[0] ^ state[1] ^ state[2]


@numba.njit(cache=True)
def optimize_layout(
    embedding,
    head,
    tail,
    n_epochs,
    epochs_per_sample,
    a,
    b,
    rng_state,
    gamma,
    initial_alpha,
    negative_sample_rate,
):
    """Negative-sampling SGD on the fuzzy-set cross-entropy objective.

    Edges are revisited on a per-edge schedule proportional to their
    membership weight; the learning rate decays linearly from
    ``initial_alpha`` to 0. ``embedding`` (float32) is updated in place.
    """
    dim = embedding.shape[1]
    n_vertices = embedding.shape[0]
    epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    epoch_of_next_sample = epochs_per_sample.copy()

    for n in range(n_epochs):
        alpha = initial_alpha * (1.0 - n / n_epochs)
        for i in range(epochs_per_sample.shape[0]):
            if epoch_of_next_sample[i] > n:
                continue
            j = head[i]
            k = tail[i]

            dist_squared = _rdist(embedding[j], embedding[k])
            if dist_squared > 0.0:
                grad_coeff = -2.0 * a * b * dist_squared ** (b - 1.0)
                grad_coeff /= a * dist_squared**b + 1.0
            else:
                grad_coeff = 0.0
            for d in range(dim):
                grad_d = _clip(grad_coeff * (embedding[j, d] - embedding[k, d]))
                embedding[j, d] += grad_d * alpha
                embedding[k, d] -= grad_d * alpha

            epoch_of_next_sample[i] += epochs_per_sample[i]

            n_neg_samples = int(
                (n - epoch_of_next_negative_sample[i]) / epochs_per_negative_sample[i]
            )
            for _ in range(n_neg_samples):
                kneg = _tau_rand_int(rng_state) % n_vertices
                if kneg == j:
                    continue
                dist_squared = _rdist(embedding[j], embedding[kneg])
                if dist_squared > 0.0:
                    grad_coeff = 2.0 * gamma * b
                    grad_coeff /= (0.001 + dist_squared) * (a * dist_squared**b + 1.0)
                else:
                    grad_coeff = 0.0
                for d in range(dim):
                    if grad_coeff > 0.0:
                        grad_d = _clip(grad_coeff * (embedding[j, d] - embedding[kneg, d]))
                    else:
                        grad_d = 4.0
                    embedding[j, d] += grad_d * alpha

            epoch_of_next_negative_sample[i] += (
                n_neg_samples * epochs_per_negative_sample[i]
            )
    return embedding
