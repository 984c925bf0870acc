"""Dormand-Prince 5(4) coefficients shared by both kernel backends.

Classic DOPRI5 tableau with the first-same-as-last property: the seventh
stage is evaluated at the fifth-order solution and doubles as stage one of
the next step. ERR = B5 - B4 weights the embedded error estimate.
"""

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])

A = np.zeros((7, 7))
A[1, 0] = 1 / 5
A[2, :2] = (3 / 40, 9 / 40)
A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)

B5 = A[6].copy()  # fifth-order weights; row 6 of A by the FSAL construction
B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
ERR = B5 - B4

# step controller: h *= clamp(SAFETY * err^(-1/5), shrink, grow)
SAFETY = 0.9
MIN_SHRINK = 0.2
MAX_GROW = 5.0
ORDER_EXP = 0.2  # 1/(4+1) for the embedded 4th-order error estimate

# integration outcome codes shared by the backends
OK = 0
MAX_STEPS_EXCEEDED = 1
STEP_UNDERFLOW = 2
