"""Pure numpy/scipy versions of the compiled kernels.

Every function returns exactly what its counterpart in ``_kernels.pyx``
returns, including first-index tie routing in the projection gradient.
"""
import numpy as np
from scipy import ndimage

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def project(mask):
    row_arg = np.argmax(mask, axis=0)
    col_arg = np.argmax(mask, axis=1)
    row = mask[row_arg, np.arange(mask.shape[1])]
    col = mask[np.arange(mask.shape[0]), col_arg]
    return row, col, row_arg.astype(np.intp), col_arg.astype(np.intp)


def back_project(row, col):
    rows = np.broadcast_to(row[None, :], (col.shape[0], row.shape[0]))
    cols = np.broadcast_to(col[:, None], (col.shape[0], row.shape[0]))
    return np.where(rows <= cols, rows, cols)


def m2b(mask):
    row, col, _, _ = project(mask)
    return back_project(row, col)


def m2b_backward(mask, grad):
    h, w = mask.shape
    row, col, row_arg, col_arg = project(mask)
    pick_row = row[None, :] <= col[:, None]
    g_row = np.where(pick_row, grad, 0.0).sum(axis=0)
    g_col = np.where(pick_row, 0.0, grad).sum(axis=1)
    out = np.zeros((h, w), dtype=np.float64)
    np.add.at(out, (row_arg, np.arange(w)), g_row)
    np.add.at(out, (np.arange(h), col_arg), g_col)
    return out


def component_boxes(mask):
    labels, _ = ndimage.label(mask, structure=_FOUR_CONNECTED)
    boxes = []
    for sl in ndimage.find_objects(labels):
        boxes.append((sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1))
    return boxes


def overlap_counts(pred, gt):
    p = pred != 0
    g = gt != 0
    out = np.stack([(p & g).sum(axis=(1, 2)), p.sum(axis=(1, 2)), g.sum(axis=(1, 2))], axis=1)
    return out.astype(np.int64)
