import numpy as np

from mifusion.ba_bound import PREDICTED_VARIANCE_FLOOR


def softplus_inv(y: float) -> float:
    return float(np.log(np.expm1(y)))


def zero_mlp(mlp):
    for layer in mlp.layers:
        layer.w.data[...] = 0.0
        layer.b.data[...] = 0.0


def rig_constant_predictor(pred, mu_value, var_value):
    """Force q(y|x) = N(mu_value, var_value I) for every x."""
    zero_mlp(pred.mu_net)
    zero_mlp(pred.var_net)
    pred.mu_net.layers[-1].b.data[...] = np.asarray(mu_value, dtype=np.float64)
    pred.var_net.layers[-1].b.data[...] = softplus_inv(var_value - PREDICTED_VARIANCE_FLOOR)


def rig_linear_mean_1d(pred, slope, var_value):
    """Force a 1-D predictor to mu(x) = slope * x via the two-unit ReLU identity."""
    zero_mlp(pred.mu_net)
    zero_mlp(pred.var_net)
    first, last = pred.mu_net.layers[0], pred.mu_net.layers[-1]
    first.w.data[...] = 0.0
    first.w.data[0, 0] = 1.0
    first.w.data[0, 1] = -1.0
    last.w.data[...] = 0.0
    last.w.data[0, 0] = slope
    last.w.data[1, 0] = -slope
    pred.var_net.layers[-1].b.data[...] = softplus_inv(var_value - PREDICTED_VARIANCE_FLOOR)
