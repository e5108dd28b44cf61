import numpy as np

from .exceptions import InvalidInputError


C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

MAX_SH_DEGREE = 3
_COUNTS = {1: 0, 4: 1, 9: 2, 16: 3}


def coefficient_count(degree: int) -> int:
    if degree not in (0, 1, 2, 3):
        raise InvalidInputError(f'Unsupported SH degree {degree}; expected 0-3.')
    return (degree + 1) ** 2


def sh_degree_for_count(count: int) -> int:
    try:
        return _COUNTS[int(count)]
    except KeyError:
        raise InvalidInputError(f'{count} SH coefficients per channel do not match degrees 0-3.') from None


def sh_basis(degree: int, dirs: np.ndarray) -> np.ndarray:
    """Real SH basis values, shape (N, (degree + 1) ** 2), for unit directions (N, 3)."""
    count = coefficient_count(degree)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    basis = np.empty((dirs.shape[0], count))
    basis[:, 0] = C0
    if degree > 0:
        basis[:, 1] = -C1 * y
        basis[:, 2] = C1 * z
        basis[:, 3] = -C1 * x
    if degree > 1:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        basis[:, 4] = C2[0] * xy
        basis[:, 5] = C2[1] * yz
        basis[:, 6] = C2[2] * (2.0 * zz - xx - yy)
        basis[:, 7] = C2[3] * xz
        basis[:, 8] = C2[4] * (xx - yy)
        if degree > 2:
            basis[:, 9] = C3[0] * y * (3 * xx - yy)
            basis[:, 10] = C3[1] * xy * z
            basis[:, 11] = C3[2] * y * (4 * zz - xx - yy)
            basis[:, 12] = C3[3] * z * (2 * zz - 3 * xx - 3 * yy)
            basis[:, 13] = C3[4] * x * (4 * zz - xx - yy)
            basis[:, 14] = C3[5] * z * (xx - yy)
            basis[:, 15] = C3[6] * x * (xx - 3 * yy)
    return basis


def eval_sh_raw(coeffs: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Colour before clamping: SH expansion plus the 0.5 offset."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    single = coeffs.ndim == 2
    coeffs = coeffs.reshape(-1, coeffs.shape[-2], 3)
    degree = sh_degree_for_count(coeffs.shape[1])
    dirs = np.broadcast_to(np.asarray(dirs, dtype=np.float64).reshape(-1, 3), (coeffs.shape[0], 3))
    basis = sh_basis(degree, dirs)
    result = np.einsum('nk,nkc->nc', basis, coeffs) + 0.5
    return result[0] if single else result


def eval_sh(coeffs: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """RGB from SH coefficients ((K, 3) or (N, K, 3)) seen along unit `dirs`."""
    return np.maximum(eval_sh_raw(coeffs, dirs), 0.0)


def rgb_to_sh(rgb) -> np.ndarray:
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / C0


def sh_to_rgb(dc) -> np.ndarray:
    return np.asarray(dc, dtype=np.float64) * C0 + 0.5


def _sphere_samples(count: int = 64) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def sh_rotation(degree: int, rotation) -> np.ndarray:
    """Matrix M with eval(M @ c, R d) == eval(c, d) for every direction d.

    Each band is closed under rotation, so a least-squares fit on a fixed set
    of sample directions is exact up to rounding.
    """
    rotation = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
    dirs = _sphere_samples()
    target = sh_basis(degree, dirs)
    source = sh_basis(degree, dirs @ rotation)
    matrix, *_ = np.linalg.lstsq(target, source, rcond=None)
    return matrix
