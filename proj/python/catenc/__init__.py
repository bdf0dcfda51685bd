"""Category encoders backed by the catenc C++ core."""

try:
    from . import _catenc as _core
except ImportError:  # build-tree layout: the extension sits on sys.path itself
    import _catenc as _core

_NAMES = [
    "ConfigError",
    "DataError",
    "Encoder",
    "NumericError",
    "contrast_table",
    "fit_encoder",
    "fit_mnl",
    "group_averages",
    "knn_regress",
    "load_encoder",
    "mnl_probabilities",
    "paired_t_test",
    "pseudo_inverse",
    "run_benchmark",
    "simulate",
    "sparse_pca",
    "student_t_cdf",
    "student_t_two_sided_p",
    "svd",
]

for _name in _NAMES:
    globals()[_name] = getattr(_core, _name)

__all__ = list(_NAMES)
