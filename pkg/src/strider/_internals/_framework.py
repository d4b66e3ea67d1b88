"""Classes defining the overall structure of the strider framework."""
import copy
import warnings
from typing import Dict, List, Optional, Type, Union


class Component:
    """
    Base class representing a component model.

    Components are the interchangeable parts of a recognizer: the spatial encoder,
    the temporal network of a locator and the multi-unit integrator. Each concrete
    model declares a class variable ``_defaults`` holding its model parameters; the
    constructor checks passed parameters against it and stores the merged result in
    ``self.params``.
    """

    _defaults = {}

    def __init__(self, **model_params):
        for k in model_params:
            if k not in self._defaults:
                raise ValueError(
                    f"{k} is not a valid argument for the {self.__class__.__name__} model"
                )

        self.params = copy.copy(self._defaults)
        self.params.update(model_params)

    @classmethod
    def get_models(cls) -> Dict[str, Type]:
        """Get a dictionary of all implemented models for this component."""
        return cls._plugins


def get_base_components() -> List[Type[Component]]:
    """Get a list of classes defining base components."""
    return Component.__subclasses__()


def get_base_component(name: Union[str, Type[Component]]) -> Type[Component]:
    """Return an actual class representing a component.

    Parameters
    ----------
    name
        The name of the component for which to return a class. If ``name`` is a class,
        then just return it (after checking that it is a Component).
    """
    if isinstance(name, str):
        avail = [cmp for cmp in get_base_components() if cmp.__name__ == name]
        if not avail:
            raise ValueError(
                f"There are no components called '{name}'. Available: {get_base_components()}"
            )
        return avail[-1]

    try:
        assert issubclass(name, Component)
        return name
    except (TypeError, AssertionError):
        raise ValueError(f"{name} must be str or a Component subclass")


def pluggable(cls):
    """A decorator that registers every concrete subclass under its class name."""
    cls._plugins = {}

    @classmethod
    def init_sc(kls, abstract=False):
        if not abstract:
            kls._plugins[kls.__name__] = kls

    cls.__init_subclass__ = init_sc
    return cls


def get_mdl(
    name: Union[str, Type[Component]], kind: Optional[Union[str, Type[Component]]] = None
) -> Type[Component]:
    """Return a defined model with given name.

    Parameters
    ----------
    name
        The name of the model to return. Can be the actual model class itself.
    kind
        The kind of component to search for, e.g. ``"TemporalNet"``. Several kinds
        share model names (``MeanPool`` is both a temporal network and an
        integrator), so passing ``kind`` is strongly advised.

    Returns
    -------
    model
        The actual model class (not instantiated).
    """
    if kind is not None:
        kind = get_base_component(kind)

    if isinstance(name, str):
        if kind is not None:
            try:
                return kind._plugins[name]
            except KeyError:
                raise ValueError(
                    f"The model {name} is not a defined {kind.__name__} model. "
                    f"Available: {tuple(kind._plugins.keys())}"
                )

        avail_models = [
            cls
            for cmp in get_base_components()
            for key, cls in getattr(cmp, "_plugins", {}).items()
            if key == name
        ]
        if not avail_models:
            raise ValueError(f"No model found with name '{name}'.")
        if len(avail_models) > 1:
            warnings.warn(
                f"More than one model was found with name '{name}'. Returning {avail_models[-1]}."
            )
        return avail_models[-1]

    try:
        assert issubclass(name, kind or Component)
        return name
    except (TypeError, AssertionError):
        raise ValueError(f"{name} must be str or {(kind or Component).__name__} subclass")


class _Validator(type):
    def __call__(cls, *args, **kwargs):
        obj = type.__call__(cls, *args, **kwargs)
        obj.validate()
        return obj


class Framework(metaclass=_Validator):
    """
    Class representing a coherent framework of component models.

    Subclasses are composed of methods decorated with ``@parameter`` for user inputs
    and ``@cached_quantity`` for derived objects. Every keyword accepted by the
    constructor *must* be defined as a ``parameter`` so that it can be updated later.
    """

    _validate = True
    _validate_every_param_set = False

    def validate(self):
        pass

    def update(self, **kwargs):
        """Update parameters of the framework with kwargs, then re-validate."""
        self._validate = False
        try:
            for k in list(kwargs):
                if k in self.get_all_parameter_names():
                    setattr(self, k, kwargs.pop(k))
            self._validate = True
            self.validate()
        except Exception:
            self._validate = True
            raise

        if kwargs:
            raise ValueError(f"Invalid arguments: {kwargs}")

    def clone(self, **kwargs):
        """Create and return an updated clone of the current object."""
        clone = copy.deepcopy(self)
        clone.update(**kwargs)
        return clone

    @classmethod
    def get_all_parameter_names(cls) -> List[str]:
        """All parameter names of the class, base-class parameters first."""
        names = []
        for klass in reversed(cls.__mro__):
            for name, obj in vars(klass).items():
                if (
                    isinstance(obj, property)
                    and hasattr(obj.fget, "parameter_kind")
                    and name not in names
                ):
                    names.append(name)
        return names

    @classmethod
    def get_all_parameter_defaults(cls) -> dict:
        """Dictionary of all parameters and defaults."""
        K = cls()
        return {name: getattr(K, name) for name in cls.get_all_parameter_names()}

    @classmethod
    def parameter_kind(cls, name: str) -> str:
        return getattr(cls, name).fget.parameter_kind

    @property
    def parameter_values(self) -> dict:
        """Dictionary of all parameters and their current values."""
        return {name: getattr(self, name) for name in self.get_all_parameter_names()}

    @classmethod
    def parameter_info(cls, names=None) -> str:
        """Return a short description of each parameter (optionally only ``names``)."""
        docs = []
        for name in cls.get_all_parameter_names():
            if names and name not in names:
                continue
            doc = getattr(cls, name).__doc__ or ""
            doc = doc.replace("**Parameter**:", "").strip()
            lines = [ln.strip() for ln in doc.split("\n") if ln.strip()]
            typ = next((ln.split(":type:")[-1].strip() for ln in lines if ":type:" in ln), "")
            lines = [ln for ln in lines if ":type:" not in ln]
            docs.append(f"{name} : {typ}\n    " + "\n    ".join(lines))
        return "\n\n".join(docs)
