"""Brute-force reference implementations used as independent test oracles.

Everything here is deliberately written with plain Python loops and counting
so it shares no code or vectorization strategy with the package.
"""

import math


def oracle_ranks(values):
    """1-based average ranks by explicit counting."""
    ranks = []
    for x in values:
        less = sum(1 for y in values if y < x)
        equal = sum(1 for y in values if y == x)
        ranks.append(less + (equal + 1) / 2.0)
    return ranks


def oracle_spearman(preds, gts):
    rp, rg = oracle_ranks(preds), oracle_ranks(gts)
    n = len(rp)
    mp = sum(rp) / n
    mg = sum(rg) / n
    num = sum((a - mp) * (b - mg) for a, b in zip(rp, rg))
    den = math.sqrt(sum((a - mp) ** 2 for a in rp) * sum((b - mg) ** 2 for b in rg))
    return num / den


def oracle_relative_l2(preds, gts, y_min, y_max):
    total = 0.0
    for p, g in zip(preds, gts):
        total += ((p - g) / (y_max - y_min)) ** 2
    return 100.0 * total / len(preds)


def oracle_step_frames(timestamps, total_frames):
    """Each step as an explicit set of 1-indexed frames."""
    bounds = [0] + list(timestamps) + [total_frames]
    return [set(range(a + 1, b + 1)) for a, b in zip(bounds[:-1], bounds[1:])]


def oracle_sample_iou(pred_ts, gt_ts, total_frames):
    pred_steps = oracle_step_frames(pred_ts, total_frames)
    gt_steps = oracle_step_frames(gt_ts, total_frames)
    ious = []
    for p, g in zip(pred_steps, gt_steps):
        union = p | g
        ious.append(len(p & g) / len(union) if union else 0.0)
    return sum(ious) / len(ious)


def oracle_aiou(pred_sets, gt_sets, total_frames, d):
    hits = 0
    for p, g in zip(pred_sets, gt_sets):
        if oracle_sample_iou(p, g, total_frames) >= d:
            hits += 1
    return hits / len(pred_sets)


def oracle_mae(pred, gt):
    total = 0.0
    count = 0
    for p_row, g_row in zip(pred, gt):
        for p, g in zip(p_row, g_row):
            total += abs(float(p) - float(g))
            count += 1
    return total / count


def oracle_f_measure(pred, gt, beta2):
    tp = fp = fn = 0
    for p_row, g_row in zip(pred, gt):
        for p, g in zip(p_row, g_row):
            p, g = bool(p), bool(g)
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif g and not p:
                fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if beta2 * precision + recall == 0:
        return 0.0
    return (1 + beta2) * precision * recall / (beta2 * precision + recall)


_EPS = 1e-12


def _mean(values):
    return sum(values) / len(values)


def _object_piece(values):
    if not values:
        return 0.0
    x = _mean(values)
    if len(values) > 1:
        sigma = math.sqrt(sum((v - x) ** 2 for v in values) / (len(values) - 1))
    else:
        sigma = 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _ssim_piece(pred_cells, gt_cells):
    n = len(pred_cells)
    if n == 0:
        return 0.0
    x = _mean(pred_cells)
    y = _mean(gt_cells)
    norm = max(n - 1, 1)
    sx = sum((p - x) ** 2 for p in pred_cells) / norm
    sy = sum((g - y) ** 2 for g in gt_cells) / norm
    sxy = sum((p - x) * (g - y) for p, g in zip(pred_cells, gt_cells)) / norm
    a = 4.0 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0.0:
        return a / (b + _EPS)
    return 1.0 if b == 0.0 else 0.0


def oracle_s_measure(pred, gt, alpha):
    """Loop-based structure measure following the reference recipe."""
    h, w = len(gt), len(gt[0])
    flat_gt = [float(gt[i][j]) for i in range(h) for j in range(w)]
    flat_pred = [float(pred[i][j]) for i in range(h) for j in range(w)]
    y = _mean(flat_gt)
    if y == 0.0:
        return min(max(1.0 - _mean(flat_pred), 0.0), 1.0)
    if y == 1.0:
        return min(max(_mean(flat_pred), 0.0), 1.0)

    fg_vals = [p for p, g in zip(flat_pred, flat_gt) if g == 1]
    bg_vals = [1.0 - p for p, g in zip(flat_pred, flat_gt) if g == 0]
    s_object = y * _object_piece(fg_vals) + (1 - y) * _object_piece(bg_vals)

    rows = [i for i in range(h) for j in range(w) if gt[i][j]]
    cols = [j for i in range(h) for j in range(w) if gt[i][j]]
    cy = int(round(_mean(rows))) + 1
    cx = int(round(_mean(cols))) + 1

    s_region = 0.0
    quadrants = [
        (range(0, cy), range(0, cx)),
        (range(0, cy), range(cx, w)),
        (range(cy, h), range(0, cx)),
        (range(cy, h), range(cx, w)),
    ]
    for row_range, col_range in quadrants:
        p_cells = [float(pred[i][j]) for i in row_range for j in col_range]
        g_cells = [float(gt[i][j]) for i in row_range for j in col_range]
        weight = len(p_cells) / (h * w)
        s_region += weight * _ssim_piece(p_cells, g_cells)

    value = alpha * s_object + (1 - alpha) * s_region
    return min(max(value, 0.0), 1.0)
