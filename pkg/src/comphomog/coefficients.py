"""Y-periodic matrix-valued diffusivities and their eps-rescalings.

Every field reduces its argument modulo 1 componentwise before evaluating,
so periodicity holds by construction. Evaluation is vectorised: ``y`` of
shape (..., dim) yields matrices of shape (..., dim, dim).
"""
import numpy as np

from .errors import InvalidArgument

BETA_MIN = 1e-8
_CHECK_SAMPLES = 64


def wrap_unit(s):
    """Reduce modulo 1 into [0, 1); ``np.mod`` alone can round up to 1.0."""
    r = np.mod(np.asarray(s, dtype=float), 1.0)
    return np.where(r >= 1.0, 0.0, r)


# --- scalar one-periodic profiles -------------------------------------------

class Profile:
    """Scalar 1-periodic function of one variable."""

    def __call__(self, s):
        return self.evaluate(wrap_unit(s))

    def evaluate(self, s):
        raise NotImplementedError


class ConstantProfile(Profile):
    def __init__(self, value):
        self.value = float(value)

    def evaluate(self, s):
        return np.full(np.shape(s), self.value)

    def __repr__(self):
        return f"ConstantProfile({self.value})"


class SinProfile(Profile):
    """``mean + amplitude * sin(2 pi s)``."""

    def __init__(self, mean, amplitude):
        self.mean = float(mean)
        self.amplitude = float(amplitude)

    def evaluate(self, s):
        return self.mean + self.amplitude * np.sin(2.0 * np.pi * s)

    def __repr__(self):
        return f"SinProfile({self.mean}, {self.amplitude})"


class StepProfile(Profile):
    """Piecewise constant on equal sub-intervals of [0, 1)."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise InvalidArgument("step profile needs at least one value")

    def evaluate(self, s):
        k = np.minimum((s * self.values.size).astype(np.int64), self.values.size - 1)
        return self.values[k]

    def __repr__(self):
        return f"StepProfile({self.values.tolist()})"


class FunctionProfile(Profile):
    """Wraps a vectorised callable defined on [0, 1)."""

    def __init__(self, func):
        self.func = func

    def evaluate(self, s):
        return np.asarray(self.func(s), dtype=float) * np.ones(np.shape(s))


def as_profile(p):
    if isinstance(p, Profile):
        return p
    if callable(p):
        return FunctionProfile(p)
    return ConstantProfile(p)


# --- matrix fields ----------------------------------------------------------

class CoefficientField:
    """Base class; subclasses implement :meth:`_evaluate` on reduced ``y``."""

    kind = None

    def __init__(self, dim, beta=BETA_MIN):
        if dim not in (1, 2):
            raise InvalidArgument(f"dim must be 1 or 2, got {dim}")
        if not beta >= BETA_MIN:
            raise InvalidArgument(f"ellipticity floor must be >= {BETA_MIN}, got {beta}")
        self.dim = dim
        self.beta = float(beta)

    def _check_ellipticity(self):
        s = (np.arange(_CHECK_SAMPLES) + 0.5) / _CHECK_SAMPLES
        grids = np.meshgrid(*([s] * self.dim), indexing="ij")
        y = np.stack([g.ravel() for g in grids], axis=-1)
        A = self._evaluate(y)
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        lam = np.linalg.eigvalsh(sym).min()
        if lam < self.beta:
            raise InvalidArgument(
                f"{self!r} is not uniformly elliptic: min eigenvalue {lam:g} < beta={self.beta:g}"
            )

    def _reduce(self, y):
        y = np.asarray(y, dtype=float)
        if self.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
            y = y[..., None]
        if y.shape[-1] != self.dim:
            raise InvalidArgument(f"points must have {self.dim} components")
        return wrap_unit(y)

    def eval_cell(self, y):
        """Matrix value ``A(y)``; accepts a point or an array of points."""
        return self._evaluate(self._reduce(y))

    def eval_eps(self, x, eps):
        """Rescaled value ``A(x / eps)``."""
        if not eps > 0:
            raise InvalidArgument(f"eps must be positive, got {eps}")
        return self.eval_cell(np.asarray(x, dtype=float) / eps)

    @property
    def is_symmetric(self):
        return True

    @property
    def is_constant(self):
        return False

    def _evaluate(self, y):
        raise NotImplementedError


class ConstantField(CoefficientField):
    kind = "constant"

    def __init__(self, matrix, dim=None, beta=BETA_MIN):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape == (1, 1) and dim == 2:
            m = m[0, 0] * np.eye(2)
        super().__init__(m.shape[0], beta)
        if m.shape != (self.dim, self.dim):
            raise InvalidArgument(f"constant matrix has shape {m.shape}")
        self.matrix = m
        self._check_ellipticity()

    def _evaluate(self, y):
        return np.broadcast_to(self.matrix, y.shape[:-1] + self.matrix.shape).copy()

    @property
    def is_symmetric(self):
        return bool(np.array_equal(self.matrix, self.matrix.T))

    @property
    def is_constant(self):
        return True

    def __repr__(self):
        return f"ConstantField({self.matrix.tolist()})"


class DiagonalField(CoefficientField):
    """Diagonal matrix whose i-th entry is a profile of ``y_i``."""

    kind = "diagonal-profiles"

    def __init__(self, profiles, beta=BETA_MIN):
        self.profiles = [as_profile(p) for p in profiles]
        super().__init__(len(self.profiles), beta)
        self._check_ellipticity()

    def _evaluate(self, y):
        out = np.zeros(y.shape[:-1] + (self.dim, self.dim))
        for i, p in enumerate(self.profiles):
            out[..., i, i] = p.evaluate(y[..., i])
        return out

    @property
    def is_constant(self):
        return all(isinstance(p, ConstantProfile) for p in self.profiles)

    def __repr__(self):
        return f"DiagonalField({self.profiles})"


class LayeredField(CoefficientField):
    """2D field whose four entries are profiles of ``y_1`` only."""

    kind = "layered"

    def __init__(self, a11, a12, a21, a22, beta=BETA_MIN):
        super().__init__(2, beta)
        self.entries = [[as_profile(a11), as_profile(a12)], [as_profile(a21), as_profile(a22)]]
        self._check_ellipticity()

    def _evaluate(self, y):
        out = np.empty(y.shape[:-1] + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = self.entries[i][j].evaluate(y[..., 0])
        return out

    @property
    def is_symmetric(self):
        s = (np.arange(_CHECK_SAMPLES) + 0.5) / _CHECK_SAMPLES
        return bool(np.array_equal(self.entries[0][1].evaluate(s), self.entries[1][0].evaluate(s)))

    def __repr__(self):
        return f"LayeredField({self.entries})"


class TabulatedField(CoefficientField):
    """Samples on a uniform periodic grid with multilinear interpolation.

    ``samples`` has shape (n,)*dim + (dim, dim); sample ``k`` sits at
    ``y = k / n``.
    """

    kind = "tabulated"

    def __init__(self, samples, beta=BETA_MIN):
        samples = np.asarray(samples, dtype=float)
        dim = samples.ndim - 2
        super().__init__(dim, beta)
        if samples.shape[-2:] != (dim, dim) or len(set(samples.shape[:dim])) != 1:
            raise InvalidArgument(f"bad sample array shape {samples.shape}")
        self.samples = samples
        self.n = samples.shape[0]
        self._check_ellipticity()

    @classmethod
    def from_function(cls, func, n, dim, beta=BETA_MIN):
        """Tabulate ``func(y) -> (..., dim, dim)`` on an ``n**dim`` grid."""
        s = np.arange(n) / n
        grids = np.meshgrid(*([s] * dim), indexing="ij")
        y = np.stack(grids, axis=-1)
        return cls(func(y), beta)

    @classmethod
    def from_file(cls, path, beta=BETA_MIN):
        """Read ``n**dim`` rows of ``dim*dim`` entries, row-major grid order.

        The first line must be a header comment ``# dim=<d> n=<n>``.
        """
        with open(path) as fh:
            header = fh.readline().lstrip("#").split()
            meta = dict(tok.split("=") for tok in header)
            dim, n = int(meta["dim"]), int(meta["n"])
            data = np.loadtxt(fh, ndmin=2)
        if data.shape != (n**dim, dim * dim):
            raise InvalidArgument(f"{path}: expected {(n**dim, dim * dim)} values, got {data.shape}")
        return cls(data.reshape((n,) * dim + (dim, dim)), beta)

    def _evaluate(self, y):
        n = self.n
        t = y * n
        i0 = np.floor(t).astype(np.int64)
        f = t - i0
        i0 %= n
        i1 = (i0 + 1) % n
        out = np.zeros(y.shape[:-1] + (self.dim, self.dim))
        for corner in range(2**self.dim):
            idx = []
            wgt = np.ones(y.shape[:-1])
            for ax in range(self.dim):
                hi = (corner >> ax) & 1
                idx.append(i1[..., ax] if hi else i0[..., ax])
                wgt = wgt * (f[..., ax] if hi else 1.0 - f[..., ax])
            out += wgt[..., None, None] * self.samples[tuple(idx)]
        return out

    @property
    def is_symmetric(self):
        return bool(np.array_equal(self.samples, np.swapaxes(self.samples, -1, -2)))

    def __repr__(self):
        return f"TabulatedField(dim={self.dim}, n={self.n})"


def constant(value, dim=1):
    """``value * Id`` in ``dim`` dimensions."""
    return ConstantField(float(value) * np.eye(dim))


def sin1d(mean, amplitude, dim=1, other=None):
    """Oscillation ``mean + amplitude sin(2 pi y_1)`` in the first entry.

    In 2D the second diagonal entry is ``other`` (defaults to ``mean``).
    """
    profs = [SinProfile(mean, amplitude)]
    if dim == 2:
        profs.append(ConstantProfile(mean if other is None else other))
    return DiagonalField(profs)
