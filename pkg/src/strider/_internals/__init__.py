"""
A subpackage containing internal definitions and utilities that structure the library.
"""
from ._cache import cached_quantity, dependencies, obj_eq, parameter
from ._framework import (
    Framework,
    Component,
    pluggable,
    get_mdl,
    get_base_component,
    get_base_components,
)
from ._checks import positive_int
