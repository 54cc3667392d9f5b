"""plotkit: offline rendering for clbf-forge CSV exports.

Consumes only exported files (level-set grids, trajectory monitors,
growth probes); never invokes the toolkit itself.
"""

__version__ = "0.1.0"

from .io import GridData, GrowthData, SchemaError, TrajectoryData, load_grid, load_growth, load_trajectory  # noqa: F401
from .plots import PlotJob, contour_vertices, plot_growth, plot_levelsets, plot_trajectory  # noqa: F401
