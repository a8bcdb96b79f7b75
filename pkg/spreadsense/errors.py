"""
Exceptions raised across spreadsense.
"""


class SpreadSense_Error(Exception):
    pass


class InvalidArgument_Error(SpreadSense_Error, ValueError):
    pass


class InfeasibleTarget_Error(SpreadSense_Error):
    pass


class NumericFailure_Error(SpreadSense_Error, ArithmeticError):
    pass


class Format_Error(SpreadSense_Error):
    def __init__(self, msg, offset=None):
        if offset is not None:
            msg = "{0} (at byte offset {1})".format(msg, offset)
        super().__init__(msg)
        self.offset = offset
