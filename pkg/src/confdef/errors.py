"""Exception types shared by every module."""


class GeometryError(ValueError):
    """A precondition on the geometric input failed.

    ``index`` carries the offending grid index when one exists, ``stage`` a
    short tag naming the pipeline step that raised.
    """

    def __init__(self, message, index=None, stage=None):
        text = message
        if index is not None:
            text = f"{message} (grid index {tuple(int(i) for i in index)})"
        if stage is not None:
            text = f"[{stage}] {text}"
        super().__init__(text)
        self.index = None if index is None else tuple(int(i) for i in index)
        self.stage = stage
        self.raw_message = message


def first_bad_index(mask):
    """Grid index of the first True entry of a boolean mask, or None."""
    import numpy as np

    hits = np.argwhere(mask)
    if hits.size == 0:
        return None
    return tuple(hits[0])
