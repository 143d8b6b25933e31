"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def check_imu_matrix(X, min_samples: int = 2) -> np.ndarray:
    """(N, 7) array ``t, wx, wy, wz, ax, ay, az`` with increasing timestamps."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
    if X.shape[1] != 7:
        raise ValueError(f"IMU matrix must have 7 columns (t, wx, wy, wz, ax, ay, az), got {X.shape[1]}")
    if np.any(np.diff(X[:, 0]) <= 0):
        raise ValueError("IMU timestamps must be strictly increasing")
    return X


def check_channels(X, min_samples: int = 2) -> np.ndarray:
    """2-D array of one or more signal channels (columns)."""
    return check_array(X, dtype=np.float64, ensure_min_samples=min_samples)


def check_scale_design(X, y=None):
    """Design rows ``[a_mono (3), R row-major (9)]`` and optional (N, 3) accelerometer targets."""
    if y is None:
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
    else:
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, ensure_min_samples=2)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != 3:
            raise ValueError(f"y must have shape (n_samples, 3), got {y.shape}")
    if X.shape[1] != 12:
        raise ValueError(f"X must have 12 columns (acceleration, flattened rotation), got {X.shape[1]}")
    R = X[:, 3:].reshape(-1, 3, 3)
    if np.max(np.abs(np.einsum("nki,nkj->nij", R, R) - np.eye(3))) > 1e-9:
        raise ValueError("rotation columns of X are not orthonormal")
    return (X, R) if y is None else (X, R, y)


def check_distances(X, y):
    """Ground-truth distances (N, 1) and estimated distances (N,)."""
    X, y = check_X_y(X, y, dtype=np.float64, ensure_min_samples=2, y_numeric=True)
    if X.shape[1] != 1:
        raise ValueError(f"X must hold a single distance column, got {X.shape[1]}")
    return X[:, 0], y
