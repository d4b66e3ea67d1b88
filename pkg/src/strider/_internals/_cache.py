"""
Decorators giving framework classes tracked parameters and lazily computed quantities.

A ``cached_quantity`` records every ``parameter`` it reads while it is being computed
(directly, or through other cached quantities). Setting one of those parameters to a
new value drops the cached value, so the next access rebuilds it from the new inputs.
Quantities that never read the parameter are left alone, which is what lets an
:class:`~strider.training.experiment.Experiment` change its trade-off factor without
throwing away a trained network.
"""
from functools import update_wrapper
import warnings

import numpy as np

PARAMETER_KINDS = ("param", "option", "model", "switch", "res")


class _Tracking:
    """Per-instance bookkeeping: parameter values, cached values and dependencies."""

    __slots__ = ("values", "cache", "deps", "active")

    def __init__(self):
        self.values = {}
        self.cache = {}
        self.deps = {}
        self.active = []

    def touch(self, names):
        for q in self.active:
            self.deps[q].update(names)

    def invalidate(self, par):
        stale = [q for q, d in self.deps.items() if par in d and q not in self.active]
        for q in stale:
            self.cache.pop(q, None)
            del self.deps[q]
        return stale


def _tracking(obj) -> _Tracking:
    try:
        return obj.__dict__["_tracking"]
    except KeyError:
        state = obj.__dict__["_tracking"] = _Tracking()
        return state


def obj_eq(ob1, ob2):
    try:
        return bool(ob1 == ob2)
    except ValueError:
        # Could be a numpy array.
        return bool(np.all(ob1 == ob2))


def cached_quantity(f):
    """
    A property computed on first access and cached until one of its inputs changes.

    Examples
    --------
    >>> class Cached(Framework):
    ...     @parameter("param")
    ...     def width(self, val):
    ...         return val
    ...
    ...     @cached_quantity
    ...     def doubled(self):
    ...         return 2 * self.width

    ``doubled`` is computed once; setting ``width`` (through :meth:`Framework.update`)
    marks it stale.
    """
    name = f.__name__

    def _get_property(self):
        state = _tracking(self)
        if name in state.cache:
            state.touch(state.deps[name])
            return state.cache[name]

        state.deps[name] = set()
        state.active.append(name)
        try:
            value = f(self)
        except Exception:
            state.deps.pop(name, None)
            raise
        finally:
            state.active.pop()

        state.cache[name] = value
        state.touch(state.deps[name])
        return value

    def _del_property(self):
        state = _tracking(self)
        state.cache.pop(name, None)
        state.deps.pop(name, None)

    update_wrapper(_get_property, f)
    return property(_get_property, None, _del_property, f.__doc__)


def parameter(kind):
    """
    Mark a method as the setter-validator of a user-supplied parameter.

    The decorated function receives the raw value and returns the value to store
    (raising ``ValueError`` if it is out of range). Dictionaries passed to ``*_params``
    parameters are merged into the existing dictionary; an empty dict clears it.

    Parameters
    ----------
    kind : str
        One of "param", "option", "model", "switch" or "res". The kind is recorded on
        the property (``fget.parameter_kind``) for introspection and documentation.
    """
    if kind not in PARAMETER_KINDS:
        raise ValueError(f"kind must be one of {PARAMETER_KINDS}, got '{kind}'")

    def param(f):
        name = f.__name__

        def _get_property(self):
            state = _tracking(self)
            try:
                value = state.values[name]
            except KeyError:
                raise AttributeError(f"parameter '{name}' has not been set")
            state.touch((name,))
            return value

        def _set_property(self, val):
            val = f(self, val)

            if name.endswith("_params") and val is not None and not isinstance(val, dict):
                raise ValueError(f"{name} must be a dictionary")

            state = _tracking(self)
            first = name not in state.values
            if not first:
                old = state.values[name]
                if isinstance(val, dict) and isinstance(old, dict) and val:
                    val = {**old, **val}
                if obj_eq(val, old):
                    return

            state.values[name] = val
            if first:
                return

            state.invalidate(name)
            if self._validate:
                if self._validate_every_param_set:
                    self.validate()
                else:
                    warnings.warn(
                        f"You are setting {name} directly. This is unstable, as less "
                        f"validation is performed. Use update() instead, or set "
                        f"framework._validate_every_param_set=True.",
                        category=DeprecationWarning,
                    )

        update_wrapper(_set_property, f)
        _get_property.parameter_kind = kind
        _get_property.__name__ = name

        doc = (f.__doc__ or "").strip()
        return property(_get_property, _set_property, None, "**Parameter**: " + doc)

    return param


def dependencies(obj, name: str) -> set:
    """The parameter names the cached quantity ``name`` of ``obj`` was computed from.

    The quantity is computed first if it is not cached yet.
    """
    getattr(obj, name)
    return set(_tracking(obj).deps.get(name, ()))
