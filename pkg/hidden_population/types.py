import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

# Every sampling routine takes its stream explicitly; see streams.py
RandomStream = np.random.Generator
