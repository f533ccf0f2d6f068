"""Independent reference computations shared by the test modules."""
import numpy as np


def central_gradient(fun, q, h=1e-3):
    """Five-point central difference of a vectorized scalar function ``fun(Q) -> (m,)``."""
    q = np.asarray(q, float)
    E = h * np.eye(len(q))
    P = np.vstack([q + 2 * E, q + E, q - E, q - 2 * E])
    f = np.asarray(fun(P)).reshape(4, len(q))
    return (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h)


def assert_gradient_close(analytic, numeric, rtol=1e-5, floor=1e-10):
    """Vector relative error ``|g - fd| <= rtol * max(|fd|, floor)`` in the Euclidean norm."""
    err = np.linalg.norm(np.asarray(analytic) - np.asarray(numeric))
    scale = max(np.linalg.norm(numeric), floor)
    assert err <= rtol * scale, f"gradient relative error {err / scale:.3g} exceeds {rtol}"


def log_scaled_step(fun, q, fraction=0.05, h_max=1e-3):
    """Step matched to how fast ``log fun`` varies at ``q``, from a coarse pilot difference.

    Functions that decay like Gaussian tails change by orders of magnitude
    over short distances; a fixed step either truncates badly there or
    drowns in roundoff elsewhere.
    """
    q = np.asarray(q, float)
    E = 1e-6 * np.eye(len(q))
    with np.errstate(divide="ignore"):
        f = np.log(np.asarray(fun(np.vstack([q + E, q - E]))))
    rate = np.linalg.norm((f[:len(q)] - f[len(q):]) / 2e-6)
    if not np.isfinite(rate) or rate == 0:
        return h_max
    return min(h_max, fraction / rate)


class ExtendedPrecisionPredictor:
    """The posterior of a fitted model recomputed in ``digits``-digit arithmetic.

    Shares only the hyperparameters and data with the model under test.  Near
    training points the float64 variance loses most of its digits to
    cancellation, which makes float64 finite differences useless as a
    reference; differences of this predictor stay accurate there.
    """

    def __init__(self, model, digits=40):
        import mpmath

        self.mp = mp = mpmath.mp.clone() if hasattr(mpmath.mp, "clone") else mpmath.mp
        mp.dps = digits
        self.components = [(list(c.columns), [mp.mpf(float(l)) for l in c.lengthscales],
                            mp.mpf(float(c.variance)), c.kind) for c in model.components]
        self.X = [[mp.mpf(float(v)) for v in row] for row in model.X]
        n = len(self.X)
        K = mp.matrix(n, n)
        for i, x in enumerate(self.X):
            row = self._k(x)
            for j in range(n):
                K[i, j] = row[j]
            K[i, i] += mp.mpf(float(model.nugget))
        self.L = mp.cholesky(K)
        self.beta = mp.mpf(float(model.beta))
        r = self._forward([mp.mpf(float(v)) - self.beta for v in model.y])
        self.w = self._backward(r)
        self.prior = sum(c[2] for c in self.components)

    def _corr(self, kind, r):
        mp = self.mp
        if kind == "matern52":
            s = mp.sqrt(5) * r
            return (1 + s + s * s / 3) * mp.exp(-s)
        if kind == "matern32":
            s = mp.sqrt(3) * r
            return (1 + s) * mp.exp(-s)
        return mp.exp(-r * r / 2)

    def _k(self, q):
        mp = self.mp
        out = []
        for x in self.X:
            total = mp.mpf(0)
            for cols, ls, var, kind in self.components:
                r2 = sum(((q[j] - x[j]) / l) ** 2 for j, l in zip(cols, ls))
                total += var * self._corr(kind, mp.sqrt(r2))
            out.append(total)
        return out

    def _forward(self, b):
        L, n = self.L, len(b)
        v = [None] * n
        for i in range(n):
            v[i] = (b[i] - sum(L[i, j] * v[j] for j in range(i))) / L[i, i]
        return v

    def _backward(self, b):
        L, n = self.L, len(b)
        v = [None] * n
        for i in reversed(range(n)):
            v[i] = (b[i] - sum(L[j, i] * v[j] for j in range(i + 1, n))) / L[i, i]
        return v

    def values(self, q, f_min):
        """Mean, sd and expected improvement below ``f_min`` at ``q`` (extended precision)."""
        mp = self.mp
        k = self._k(q)
        mean = self.beta + sum(a * b for a, b in zip(k, self.w))
        v = self._forward(k)
        sd = mp.sqrt(self.prior - sum(a * a for a in v))
        t = (f_min - mean) / sd
        return mean, sd, (f_min - mean) * mp.ncdf(t) + sd * mp.npdf(t)

    def gradients(self, q, f_min, h="1e-15"):
        """Central-difference gradients of mean, sd and expected improvement, as float arrays."""
        mp = self.mp
        q = [mp.mpf(float(v)) for v in q]
        f_min, h = mp.mpf(float(f_min)), mp.mpf(h)
        out = np.empty((3, len(q)))
        for j in range(len(q)):
            up, down = list(q), list(q)
            up[j] += h
            down[j] -= h
            for i, (a, b) in enumerate(zip(self.values(up, f_min), self.values(down, f_min))):
                out[i, j] = float((a - b) / (2 * h))
        return out
