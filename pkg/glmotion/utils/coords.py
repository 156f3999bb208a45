import numpy as np


def get_distances_between_coords(coordinates: np.ndarray) -> np.ndarray:
    """
    Given a sequence of coordinates along axis 0, calculate the distance between the nth and n+1st coordinates.

    Args:
    coordinates (np.ndarray): Array of shape (n, ..., 3); axis 0 is time, the last axis holds xyz.

    Returns:
    np.ndarray: Array of shape (n-1, ...) with the Euclidean step lengths.
    """
    coordinates = np.asarray(coordinates, dtype=np.float64)
    if coordinates.shape[0] < 2:
        return np.zeros((0,) + coordinates.shape[1:-1])
    return np.linalg.norm(np.diff(coordinates, axis=0), axis=-1)


def speed_histogram(coords: np.ndarray, bins: int = 16, max_speed: float = 0.1) -> np.ndarray:
    """
    Normalised histogram of per-frame joint speeds of one sequence.

    Speeds of every person and joint are pooled; values above `max_speed`
    are counted in the last bin.

    Args:
    coords (np.ndarray): Joint coordinates, shape (T, P, K, 3).
    bins (int): Number of equal-width bins on [0, max_speed].
    max_speed (float): Upper edge of the last bin, in meters per frame.

    Returns:
    np.ndarray: Histogram of shape (bins,) summing to 1, or all zeros for a single-frame sequence.
    """
    speeds = get_distances_between_coords(coords).reshape(-1)
    if speeds.size == 0:
        return np.zeros(bins)
    counts, _ = np.histogram(np.minimum(speeds, max_speed), bins=bins, range=(0.0, max_speed))
    return counts / counts.sum()
