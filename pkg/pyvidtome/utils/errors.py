'''exception hierarchy shared by all pyvidtome modules'''


class VidToMeError(Exception):
    '''base class of all errors raised by pyvidtome'''


class DimensionError(VidToMeError, ValueError):
    '''token lengths or channel counts do not agree'''


class EmptySetError(VidToMeError, ValueError):
    '''an input token set or frame sequence is empty'''


class ParameterError(VidToMeError, ValueError):
    '''a count, ratio or index lies outside its admissible range'''


class ConsistencyError(VidToMeError, ValueError):
    '''provenance, sizes or state passed between operations do not belong together'''


class ScheduleError(VidToMeError, ValueError):
    '''the noise schedule or a step index is invalid'''


class NumericError(VidToMeError, ArithmeticError):
    '''a non-finite value appeared in an intermediate result'''

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f'ERROR: non-finite values found at step <{step}> !')


class ConfigError(VidToMeError, ValueError):
    '''malformed configuration file or command-line usage'''
