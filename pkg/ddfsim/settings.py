##
# Default settings for ddfsim. Every value here can be overridden from a
# simulation config file or from the command line.
##

# Protocol
DDF_SLOTS = 4
DDF_SLOT_LENGTH = 1
DDF_RATE = 2.0
DDF_RELAY_SNR_OFFSET_DB = 3.0
DDF_SEED = 20090101

# Codes
DDF_QAM_ORDER = 2
DDF_UDM = (4, 2, 4)

# Lattice search
DDF_SEARCH_NODE_LIMIT = 10 ** 7
DDF_FORNEY_LIST_SIZE = 64

# Bounded distance relay: delta = mu * log(1 + rho), mu = DDF_BOUNDED_DISTANCE_MU / T
DDF_BOUNDED_DISTANCE_MU = 3.0

# Forney threshold calibration
DDF_TAU_GRID = tuple(10.0 ** k for k in range(-2, 9))
DDF_TAU_TARGET_FRACTION = 0.1
DDF_CALIBRATION_TRIALS = 2000

# Monte Carlo stop rule
DDF_MIN_ERRORS = 100
DDF_MAX_TRIALS = 100000
DDF_BATCH_SIZE = 500
DDF_OUTAGE_TRIALS = 100000

# SNR grid in dB
DDF_SNR_GRID = tuple(range(0, 42, 2))
