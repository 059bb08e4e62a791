class DprError(Exception):
    """Base class for every domain error raised by dprkit.

    The CLI maps these to exit code 1 and prints ``<ClassName>: <message>``.
    """

    @property
    def name(self) -> str:
        return type(self).__name__
