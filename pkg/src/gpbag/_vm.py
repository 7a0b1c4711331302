"""Compiled stack machine for evaluating many programs over a data matrix.

Programs arrive flattened: ``ops``/``args`` hold every program's prefix
nodes back to back and ``starts``/``lengths`` locate each program.  The
semantics match :func:`gpbag.gp.eval_program` bit for bit.
"""

import numpy as np
from numba import njit

ADD, SUB, MUL, PDIV, FEATURE, CONST = 0, 1, 2, 3, 4, 5
PDIV_EPS = 1e-9
CLAMP = 1e12


@njit(cache=True)
def _fix(v):
    if v != v:
        return -CLAMP
    if v == np.inf:
        return CLAMP
    if v == -np.inf:
        return -CLAMP
    return v


@njit(cache=True)
def run_programs(ops, args, starts, lengths, X):
    n_prog = starts.shape[0]
    n_rows = X.shape[0]
    out = np.empty((n_prog, n_rows))
    max_len = 1
    for p in range(n_prog):
        if lengths[p] > max_len:
            max_len = lengths[p]
    stack = np.empty(max_len)
    for p in range(n_prog):
        s = starts[p]
        e = s + lengths[p]
        for r in range(n_rows):
            top = 0
            for i in range(e - 1, s - 1, -1):
                op = ops[i]
                if op == FEATURE:
                    stack[top] = _fix(X[r, int(args[i])])
                    top += 1
                elif op == CONST:
                    stack[top] = args[i]
                    top += 1
                else:
                    a = stack[top - 1]
                    b = stack[top - 2]
                    top -= 1
                    if op == ADD:
                        v = a + b
                    elif op == SUB:
                        v = a - b
                    elif op == MUL:
                        v = a * b
                    else:
                        if abs(b) > PDIV_EPS:
                            v = a / b
                        else:
                            v = 1.0
                    stack[top - 1] = _fix(v)
            out[p, r] = stack[0]
    return out
