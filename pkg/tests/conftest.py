from sobpoly.verify import monic_recurrence, random_measure_matrix

__all__ = ["monic_recurrence", "random_measure_matrix", "random_symmetric_measure_matrix"]


def random_symmetric_measure_matrix(seed, order=2, atoms=True):
    w = random_measure_matrix(seed, order=order, atoms=atoms)
    for i in range(order + 1):
        for j in range(i):
            w.set_entry(i, j, w.entry(j, i))
    return w
