"""Independent reference computations shared by the test modules."""
import numpy as np

from wpursuit.gaussmath import uniform_bin_moments


def squared_index(rows, v):
    """Squared index along an arbitrary (not necessarily unit) vector."""
    n = rows.shape[0]
    m1, m2 = uniform_bin_moments(n)
    x = np.sort(rows @ v)
    return x.dot(x) / n - 2 * x.dot(m1) + m2.sum()


def central_differences(rows, u, h=1e-5):
    return np.array([(squared_index(rows, u + h * e) - squared_index(rows, u - h * e)) / (2 * h)
                     for e in np.eye(rows.shape[1])])


def ranks_fixed_under_perturbation(rows, u, h=1e-5):
    """True if no pair of projections swaps order along any +-h coordinate move.

    Outside that set the squared index is smooth on the whole stencil, so
    central differences measure the fixed-rank derivative.
    """
    x = rows @ u
    dx = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dx, np.inf)
    for j in range(rows.shape[1]):
        dc = np.abs(rows[:, j][:, None] - rows[:, j][None, :])
        if np.any(dx <= h * dc):
            return False
    return True
