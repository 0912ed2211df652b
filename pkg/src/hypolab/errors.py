"""Error type shared by every hypolab module."""


class HypolabError(ValueError):
    """Raised on a violated precondition.

    ``kind`` is a short machine-readable tag such as ``"invalid-parameter"``
    or ``"flag-not-symmetric"``; the message carries the details.
    """

    def __init__(self, kind, message=""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)
