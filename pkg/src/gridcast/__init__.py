"""Fast 2-D ray casting on occupancy grids."""

from .cddt import CDDT, PCDDT, SliceProjection, UpdateDisabledError, reconstruct_row
from .grid import (DistanceField, OccupancyGrid, PGMError, distance_transform, dump_pgm,
                   edge_map, is_occupied, load_pgm, save_pgm)
from .methods import (BresenhamLine, ExactCast, LookupTable, LUTTooLargeError, RangeMethod,
                      RangeMethodConfig, RayMarching, RayQuery, ZeroRange, discrete_angles)

METHODS = {
    "oracle": ExactCast,
    "bl": BresenhamLine,
    "rm": RayMarching,
    "cddt": CDDT,
    "pcddt": PCDDT,
    "lut": LookupTable,
}


def make_method(name: str, theta_disc: int = 216, max_range=None, **kwargs) -> RangeMethod:
    """Instantiate a range method by its short name."""
    try:
        cls = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
    if cls in (CDDT, PCDDT, LookupTable):
        return cls(theta_disc=theta_disc, max_range=max_range, **kwargs)
    return cls(max_range=max_range, **kwargs)


__all__ = [
    "BresenhamLine", "CDDT", "DistanceField", "ExactCast", "LookupTable", "LUTTooLargeError",
    "METHODS", "OccupancyGrid", "PCDDT", "PGMError", "RangeMethod", "RangeMethodConfig",
    "RayMarching", "RayQuery", "SliceProjection", "UpdateDisabledError", "ZeroRange",
    "discrete_angles", "distance_transform", "dump_pgm", "edge_map", "is_occupied", "load_pgm",
    "make_method", "reconstruct_row", "save_pgm",
]
