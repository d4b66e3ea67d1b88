"""The framework class supplying the train/test split to everything downstream."""
from pathlib import Path
from typing import Optional

from .._internals import Framework, cached_quantity, parameter, positive_int
from .io import load_feature_dir
from .synthetic import DatasetSplit, generate_synthetic


class VideoSource(Framework):
    """
    A source of labelled videos: either the synthetic generator or a VIMF directory.

    When ``feature_dir`` is set, the synthetic geometry parameters are ignored and the
    split is read from ``<feature_dir>/train`` and ``<feature_dir>/test``.

    Parameters
    ----------
    n_frames, feature_dim, n_classes, n_units, salient_per_unit, noise_std
        Synthetic geometry; see :func:`~strider.data.synthetic.generate_synthetic`.
    distractor_frac, halo_frames
        Synthetic distractor probability and motif halo width.
    n_train, n_test
        Synthetic split sizes.
    data_seed
        Seed of the synthetic generator.
    feature_dir
        Optional directory of VIMF files.

    Examples
    --------
    >>> src = VideoSource(n_train=50, n_test=10)
    >>> len(src.split.train)
    50
    """

    def __init__(
        self,
        n_frames: int = 120,
        feature_dim: int = 64,
        n_classes: int = 10,
        n_units: int = 3,
        salient_per_unit: int = 2,
        noise_std: float = 0.3,
        distractor_frac: float = 0.2,
        halo_frames: int = 3,
        n_train: int = 2000,
        n_test: int = 500,
        data_seed: int = 0,
        feature_dir: Optional[str] = None,
    ):
        self.n_frames = n_frames
        self.feature_dim = feature_dim
        self.n_classes = n_classes
        self.n_units = n_units
        self.salient_per_unit = salient_per_unit
        self.noise_std = noise_std
        self.distractor_frac = distractor_frac
        self.halo_frames = halo_frames
        self.n_train = n_train
        self.n_test = n_test
        self.data_seed = data_seed
        self.feature_dir = feature_dir

    @parameter("res")
    def n_frames(self, val):
        """
        Frames per synthetic video.

        :type: int
        """
        return positive_int("n_frames", val)

    @parameter("res")
    def feature_dim(self, val):
        """
        Width of every frame feature vector.

        :type: int
        """
        return positive_int("feature_dim", val)

    @parameter("param")
    def n_classes(self, val):
        """
        Number of classes.

        :type: int
        """
        return positive_int("n_classes", val, minimum=2)

    @parameter("param")
    def n_units(self, val):
        """
        Semantic units per synthetic video.

        :type: int
        """
        return positive_int("n_units", val)

    @parameter("param")
    def salient_per_unit(self, val):
        """
        Salient frames per unit.

        :type: int
        """
        return positive_int("salient_per_unit", val)

    @parameter("param")
    def noise_std(self, val):
        """
        Standard deviation of the per-frame feature noise.

        :type: float
        """
        val = float(val)
        if val < 0:
            raise ValueError(f"noise_std must be >= 0, got {val}")
        return val

    @parameter("param")
    def distractor_frac(self, val):
        """
        Probability that a background frame is replaced by pure noise.

        :type: float
        """
        val = float(val)
        if not 0 <= val <= 1:
            raise ValueError(f"distractor_frac must be in [0, 1], got {val}")
        return val

    @parameter("param")
    def halo_frames(self, val):
        """
        Frames either side of a salient frame carrying a fading motif trace.

        :type: int
        """
        return positive_int("halo_frames", val, minimum=0)

    @parameter("res")
    def n_train(self, val):
        """
        Number of synthetic training videos.

        :type: int
        """
        return positive_int("n_train", val)

    @parameter("res")
    def n_test(self, val):
        """
        Number of synthetic test videos.

        :type: int
        """
        return positive_int("n_test", val)

    @parameter("param")
    def data_seed(self, val):
        """
        Seed of the synthetic generator.

        :type: int
        """
        return positive_int("data_seed", val, minimum=0)

    @parameter("option")
    def feature_dir(self, val):
        """
        Directory holding ``train/*.vimf`` and ``test/*.vimf``. Overrides the generator.

        :type: str or None
        """
        if val in (None, ""):
            return None
        return str(val)

    def validate(self):
        super().validate()
        min_len = max(2, self.salient_per_unit)
        if self.feature_dir is None and self.n_units * min_len > self.n_frames:
            raise ValueError(
                f"{self.n_units} units of >= {min_len} frames do not "
                f"fit in {self.n_frames} frames"
            )
        if self.feature_dir is None and self.feature_dim < self.n_classes:
            raise ValueError("feature_dim must be >= n_classes for the synthetic generator")

    @cached_quantity
    def split(self) -> DatasetSplit:
        """The train/test split."""
        if self.feature_dir is not None:
            split = load_feature_dir(Path(self.feature_dir))
            if split.feature_dim != self.feature_dim:
                raise ValueError(
                    f"files in {self.feature_dir} have width {split.feature_dim}, "
                    f"but feature_dim={self.feature_dim}"
                )
            if split.num_classes != self.n_classes:
                raise ValueError(
                    f"files in {self.feature_dir} declare {split.num_classes} classes, "
                    f"but n_classes={self.n_classes}"
                )
            return split

        return generate_synthetic(
            n_frames=self.n_frames,
            feature_dim=self.feature_dim,
            n_classes=self.n_classes,
            n_units=self.n_units,
            salient_per_unit=self.salient_per_unit,
            noise_std=self.noise_std,
            n_train=self.n_train,
            n_test=self.n_test,
            seed=self.data_seed,
            distractor_frac=self.distractor_frac,
            halo_frames=self.halo_frames,
        )

    @cached_quantity
    def max_frames(self) -> int:
        """The longest video length in the split."""
        return max(s.n_frames for s in self.split.train + self.split.test)


