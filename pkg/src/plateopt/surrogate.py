"""Feed-forward eigenfrequency surrogate trained with Levenberg-Marquardt.

One sigmoid hidden layer, affine output. Inputs are the raw 35 plate
parameters z-scored with train-split statistics; outputs are the 10
eigenfrequencies, z-scored per frequency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .dataset import SampleSet
from .errors import DegenerateVariance, GateFailed, NotTrained, SingularNormalEquations
from .geometry import N_PARAMS, PlateParams

R2_GATE = 0.9
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    hidden_width: int = 30
    max_epochs: int = 80            # hard cap: always below 100
    lm_lambda_init: float = 1e-2
    lm_up: float = 10.0
    lm_down: float = 10.0
    lm_lambda_max: float = 1e12
    loss_tol: float = 1e-9          # early stop on tiny decrease
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs > 100:
            raise ValueError("epoch cap must stay below 100")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class SurrogateModel:
    """Trained network weights plus normalization and fit metrics."""

    w1: np.ndarray  # (hidden, n_in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (n_out, hidden)
    b2: np.ndarray  # (n_out,)
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    fit_report: dict = field(default_factory=dict)
    # half-width of the box around the training mean flagged as in-support
    box_halfwidth: float = 0.2

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[0]

    def _check(self):
        if self.fit_report.get("trained") is not True:
            raise NotTrained("model has no completed fit")

    def forward_normalized(self, xn: np.ndarray) -> np.ndarray:
        h = _sigmoid(xn @ self.w1.T + self.b1)
        return h @ self.w2.T + self.b2

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        """Predict (n, 10) Hz from raw (n, 35) parameter rows."""
        self._check()
        xn = (x - self.x_mean) / self.x_std
        return self.forward_normalized(xn) * self.y_std + self.y_mean

    def in_training_box(self, x: np.ndarray) -> bool:
        """True when every parameter is within the optimizer's +-20% box
        around the training mean."""
        lo = self.x_mean * (1.0 - self.box_halfwidth)
        hi = self.x_mean * (1.0 + self.box_halfwidth)
        return bool(np.all((x >= np.minimum(lo, hi)) & (x <= np.maximum(lo, hi))))

    def to_json_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
            "fit_report": self.fit_report,
            "box_halfwidth": self.box_halfwidth,
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path: str) -> "SurrogateModel":
        with open(path) as fh:
            d = json.load(fh)
        return cls(
            w1=np.asarray(d["w1"]),
            b1=np.asarray(d["b1"]),
            w2=np.asarray(d["w2"]),
            b2=np.asarray(d["b2"]),
            x_mean=np.asarray(d["x_mean"]),
            x_std=np.asarray(d["x_std"]),
            y_mean=np.asarray(d["y_mean"]),
            y_std=np.asarray(d["y_std"]),
            fit_report=d["fit_report"],
            box_halfwidth=d.get("box_halfwidth", 0.2),
        )


def _pack(w1, b1, w2, b2):
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _unpack(theta, n_in, width, n_out):
    i = 0
    w1 = theta[i : i + width * n_in].reshape(width, n_in); i += width * n_in
    b1 = theta[i : i + width]; i += width
    w2 = theta[i : i + n_out * width].reshape(n_out, width); i += n_out * width
    b2 = theta[i : i + n_out]
    return w1, b1, w2, b2


def _normal_equations(theta, Xn, Yn, n_in, width, n_out, chunk=256):
    """Residuals + accumulated J^T J and J^T r over all training rows."""
    w1, b1, w2, b2 = _unpack(theta, n_in, width, n_out)
    n_w = len(theta)
    jtj = np.zeros((n_w, n_w))
    jtr = np.zeros(n_w)
    sse = 0.0
    for s in range(0, len(Xn), chunk):
        X = Xn[s : s + chunk]
        H = _sigmoid(X @ w1.T + b1)            # (c, width)
        R = H @ w2.T + b2 - Yn[s : s + chunk]  # (c, n_out)
        S = H * (1.0 - H)
        c = len(X)
        # d r[s,k] / d theta, laid out in _pack order
        J = np.zeros((c, n_out, n_w))
        dW1 = np.einsum("kj,sj,si->skji", w2, S, X)          # (c,k,j,i)
        J[:, :, : width * n_in] = dW1.reshape(c, n_out, -1)
        off = width * n_in
        J[:, :, off : off + width] = np.einsum("kj,sj->skj", w2, S)
        off += width
        for k in range(n_out):
            J[:, k, off + k * width : off + (k + 1) * width] = H
        off += n_out * width
        for k in range(n_out):
            J[:, k, off + k] = 1.0
        Jf = J.reshape(c * n_out, n_w)
        rf = R.reshape(c * n_out)
        jtj += Jf.T @ Jf
        jtr += Jf.T @ rf
        sse += float(rf @ rf)
    loss = sse / Yn.size
    return loss, jtj, jtr


def _loss_only(theta, Xn, Yn, n_in, width, n_out):
    w1, b1, w2, b2 = _unpack(theta, n_in, width, n_out)
    R = _sigmoid(Xn @ w1.T + b1) @ w2.T + b2 - Yn
    return float((R * R).mean())


def train(samples: SampleSet, cfg: TrainConfig = TrainConfig()) -> SurrogateModel:
    """Full-batch Levenberg-Marquardt fit of the surrogate network."""
    if not samples.has_split:
        raise ValueError("dataset needs a train/test split before training")
    X = samples.design_matrix()
    Y = samples.freqs
    tr, te = samples.train_idx, samples.test_idx
    n_in, n_out = X.shape[1], Y.shape[1]
    width = cfg.hidden_width

    n_weights = width * n_in + width + n_out * width + n_out
    if len(tr) <= n_weights / 5:
        raise ValueError(
            f"{len(tr)} train rows cannot support {n_weights} weights"
        )

    x_mean, x_std = X[tr].mean(axis=0), np.maximum(X[tr].std(axis=0), 1e-12)
    y_mean, y_std = Y[tr].mean(axis=0), np.maximum(Y[tr].std(axis=0), 1e-12)
    Xn = (X[tr] - x_mean) / x_std
    Yn = (Y[tr] - y_mean) / y_std

    rng = np.random.default_rng(cfg.seed)
    r1 = np.sqrt(6.0 / (n_in + width))
    r2 = np.sqrt(6.0 / (width + n_out))
    theta = _pack(
        rng.uniform(-r1, r1, (width, n_in)),
        np.zeros(width),
        rng.uniform(-r2, r2, (n_out, width)),
        np.zeros(n_out),
    )

    lam = cfg.lm_lambda_init
    loss, jtj, jtr = _normal_equations(theta, Xn, Yn, n_in, width, n_out)
    loss_trace = [loss]
    accepted = 0
    small_steps = 0
    stop_reason = "epoch_cap"
    while accepted < cfg.max_epochs:
        if lam > cfg.lm_lambda_max:
            if accepted == 0:
                raise SingularNormalEquations("damping escalation exhausted")
            stop_reason = "lambda_overflow"
            break
        try:
            cf = cho_factor(jtj + lam * np.eye(len(theta)))
            delta = cho_solve(cf, -jtr)
        except LinAlgError:
            lam *= cfg.lm_up
            continue
        trial = theta + delta
        trial_loss = _loss_only(trial, Xn, Yn, n_in, width, n_out)
        if trial_loss < loss:
            small_steps = small_steps + 1 if loss - trial_loss < cfg.loss_tol else 0
            theta = trial
            loss = trial_loss
            loss_trace.append(loss)
            accepted += 1
            lam = max(lam / cfg.lm_down, 1e-14)
            if small_steps >= cfg.patience:
                stop_reason = "loss_tolerance"
                break
            loss, jtj, jtr = _normal_equations(theta, Xn, Yn, n_in, width, n_out)
        else:
            lam *= cfg.lm_up

    w1, b1, w2, b2 = _unpack(theta, n_in, width, n_out)
    model = SurrogateModel(
        w1=w1, b1=b1, w2=w2, b2=b2,
        x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std,
        fit_report={"trained": True},
    )
    r2_test, r2_test_agg = r_squared(model, X[te], Y[te])
    r2_train, r2_train_agg = r_squared(model, X[tr], Y[tr])
    pred_tr = model.predict_matrix(X[tr])
    pred_te = model.predict_matrix(X[te])
    model.fit_report = {
        "trained": True,
        "epochs": accepted,
        "stop_reason": stop_reason,
        "final_train_loss": loss,
        "loss_trace": loss_trace,
        "r2_test": r2_test.tolist(),
        "r2_test_aggregate": r2_test_agg,
        "r2_train_aggregate": r2_train_agg,
        "rmse_train_hz": float(np.sqrt(((pred_tr - Y[tr]) ** 2).mean())),
        "rmse_test_hz": float(np.sqrt(((pred_te - Y[te]) ** 2).mean())),
        "hidden_width": width,
        "seed": cfg.seed,
        "n_train": int(len(tr)),
        "n_test": int(len(te)),
        "dataset_meta": samples.meta,
    }
    return model


def predict(model: SurrogateModel, params: PlateParams) -> np.ndarray:
    """Predicted 10 eigenfrequencies (Hz) for one design point."""
    x = params.to_vector()
    if x.shape != (model.input_dim,):
        raise ValueError("parameter vector does not match model input size")
    return model.predict_matrix(x[None, :])[0]


def jacobian(model: SurrogateModel, params: PlateParams) -> np.ndarray:
    """Analytic (10, 35) sensitivity of predictions to raw parameters."""
    model._check()
    x = params.to_vector()
    xn = (x - model.x_mean) / model.x_std
    h = _sigmoid(model.w1 @ xn + model.b1)
    s = h * (1.0 - h)
    # chain: y = y_std * (W2 sigma(W1 xn + b1) + b2) + y_mean
    inner = (model.w2 * s[None, :]) @ model.w1  # (10, 35) in normalized coords
    return model.y_std[:, None] * inner / model.x_std[None, :]


def r_squared(
    model: SurrogateModel, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, float]:
    """Per-output and aggregate coefficient of determination."""
    if len(x) == 0:
        raise ValueError("empty partition")
    pred = model.predict_matrix(x)
    ss_tot = ((y - y.mean(axis=0)) ** 2).sum(axis=0)
    if np.any(ss_tot == 0.0):
        raise DegenerateVariance("an output is constant on this partition")
    ss_res = ((y - pred) ** 2).sum(axis=0)
    per_output = 1.0 - ss_res / ss_tot
    aggregate = 1.0 - ss_res.sum() / ss_tot.sum()
    return per_output, float(aggregate)


def ensure_gated(model: SurrogateModel, override: bool = False) -> None:
    """Reject models below the R^2 reliability gate (unless overridden)."""
    model._check()
    r2 = model.fit_report.get("r2_test_aggregate")
    if not override and (r2 is None or r2 <= R2_GATE):
        raise GateFailed(f"test R^2 {r2} is not above {R2_GATE}")
