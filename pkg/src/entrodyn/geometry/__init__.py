"""Differential-geometry kernel: charts, configuration spaces, grids,
and the conservative Laplace-Beltrami operator."""

from .charts import (
    AxisSpec,
    BUILTIN_CHARTS,
    ChartPair,
    DEFAULT_POLE_MARGIN,
    ManifoldChart,
    circle_chart,
    flat_chart,
    make_chart,
    sphere_chart,
    sphere_chart_pair,
    table_chart,
    torus_chart,
)
from .grid import (
    GridAxis,
    GridField,
    GridSpec,
    WaveField,
    inner,
    integrate,
    normalize_density,
    volume_weights,
)
from .laplace import (
    grid_tables,
    laplace_beltrami,
    laplace_beltrami_matrix,
    nodal_gradient,
)
from .space import ConfigurationSpace, NormalCoordinateReport, make_space

__all__ = [
    "AxisSpec",
    "BUILTIN_CHARTS",
    "ChartPair",
    "DEFAULT_POLE_MARGIN",
    "ManifoldChart",
    "circle_chart",
    "flat_chart",
    "make_chart",
    "sphere_chart",
    "sphere_chart_pair",
    "table_chart",
    "torus_chart",
    "GridAxis",
    "GridField",
    "GridSpec",
    "WaveField",
    "inner",
    "integrate",
    "normalize_density",
    "volume_weights",
    "grid_tables",
    "laplace_beltrami",
    "laplace_beltrami_matrix",
    "nodal_gradient",
    "ConfigurationSpace",
    "NormalCoordinateReport",
    "make_space",
]
