"""Exception types shared across the toolkit."""


class LatentFacesError(Exception):
    """Base class for all toolkit errors."""


class InvalidImageError(LatentFacesError):
    """Raster is malformed: wrong dimensionality, empty, or out-of-range pixels."""


class ImageTooSmallError(InvalidImageError):
    """Requested or provided raster is below the minimum supported size."""


class ShapeError(LatentFacesError):
    """Array shape does not match what the model expects."""


class InvalidArchitectureError(LatentFacesError):
    """Layer size chain is not strictly decreasing toward the latent width."""


class DivergenceError(LatentFacesError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class InvalidLatentError(LatentFacesError):
    """Latent vector has the wrong length or non-finite entries."""


class ModelTooLargeError(LatentFacesError):
    """Model exceeds the finite-difference harness parameter budget."""


class InsufficientDataError(LatentFacesError):
    """Operation needs more samples than were provided."""


class InvalidInputError(LatentFacesError):
    """Generic precondition failure on numeric inputs."""


class GridTooLargeError(LatentFacesError):
    """Sweep grid exceeds the candidate cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"sweep grid has {size} candidates, cap is {cap}")
        self.size = size
        self.cap = cap


class CannotCalibrateError(LatentFacesError):
    """Gallery cannot support score calibration (e.g. a single label)."""


class DegenerateGalleryError(LatentFacesError):
    """Gallery statistics collapse (coincident medians, zero variance)."""


class UnknownLabelError(LatentFacesError):
    """Referenced label is not present among the gallery labels."""


class FormatError(LatentFacesError):
    """Serialized artifact has bad magic bytes or inconsistent lengths."""


class WorkspaceError(LatentFacesError):
    """A required workspace artifact is missing or unreadable."""
