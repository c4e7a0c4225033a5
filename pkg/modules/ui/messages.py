# Console text for the experiment runner

# Validation
CONFIG_OK_TEXT = "✅ {path}: {experiment} config is valid"
CONFIG_ERROR_TEXT = "❌ {path}: {msg}"

# Runs
RUN_START_TEXT = "▶ {experiment}: seeds {seeds}, {workers} worker(s), output in {out}"
RUN_DONE_TEXT = "✅ {experiment}: done, summary at {summary}"

# Failures
VIOLATION_TEXT = "🚨 certificate violated: {msg}"
FAILURE_TEXT = "❌ {kind}: {msg}"

# Summary lines
TRACKING_SUMMARY_TEXT = (
    "tracking: upsilon_max={upsilon_max:.6g}, e_max={e_max:.6g}, "
    "violations={violations}/{runs}"
)
COVERAGE_SUMMARY_TEXT = "{experiment}: coverage {coverage:.4f} over {trials} trials"
SWEEP_SUMMARY_TEXT = "density_sweep: slope(log upsilon, log rho)={slope:.4f} over {points} pitches"
EPISODIC_SUMMARY_TEXT = "episodic: {episodes} episode(s), final upsilon={upsilon:.6g}, N_E={bound} ({status})"
