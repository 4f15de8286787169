"""Independent brute-force evaluators used by the acceptance suite.

Everything here is deliberately written as plain Python loops from the KPI
definitions, sharing no code path with the package implementations it checks.
"""


def brute_consumption(net):
    total = 0.0
    for e in net:
        if e > 0:
            total += e
    return total


def brute_price(net, rates):
    total = 0.0
    for e, t in zip(net, rates):
        cost = e * t
        if cost > 0:
            total += cost
    return total


def brute_emissions(net, intensities):
    total = 0.0
    for e, o in zip(net, intensities):
        kg = e * o
        if kg > 0:
            total += kg
    return total


def brute_zne(net):
    total = 0.0
    for e in net:
        total += e
    return total


def brute_avg_daily_peak(net):
    peaks = []
    for start in range(0, len(net), 24):
        block = net[start : start + 24]
        peak = block[0]
        for e in block[1:]:
            if e > peak:
                peak = e
        peaks.append(peak)
    return sum(peaks) / len(peaks)


def brute_ramping(net):
    total = 0.0
    for h in range(1, len(net)):
        total += abs(net[h] - net[h - 1])
    return total


def brute_one_minus_load_factor(net, block_hours=730):
    terms = []
    for start in range(0, len(net), block_hours):
        block = net[start : start + block_hours]
        peak = block[0]
        acc = 0.0
        for e in block:
            acc += e
            if e > peak:
                peak = e
        if peak <= 0:
            continue
        terms.append(1.0 - (acc / len(block)) / peak)
    if not terms:
        return float("nan")
    return sum(terms) / len(terms)


def brute_reward(net, rate, intensity, soc, w1, w2, e1, e2):
    c = net * rate
    g = net * intensity
    if c > 0:
        sign = 1.0
    elif c < 0:
        sign = -1.0
    else:
        sign = 0.0
    p = -(1.0 + sign * soc)
    return p * abs(w1 * c**e1 + w2 * g**e2)


def finite_difference_grads(net, x, loss_value, step=1e-5):
    """Central finite differences over every parameter of a DenseNet."""
    import numpy as np

    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            up = loss_value(net.forward(x))
            p[idx] = orig - step
            down = loss_value(net.forward(x))
            p[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads
