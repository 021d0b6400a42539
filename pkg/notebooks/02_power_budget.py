# coding: utf-8

# # Amplifier power against signal integrity
#
# Power is a straight line between standby draw (nothing acquired) and
# normal-mode draw (everything acquired).

# In[1]:

from mass_staging.masking import AMPLIFIERS, power_estimate, signal_integrity


# In[2]:

settings = [(0.0, 0.0), (0.2, 0.1), (0.5, 0.2), (0.8, 0.5)]
print("r_a  r_e  integrity " + " ".join(f"{a.name:>10}" for a in AMPLIFIERS.values()))
for r_a, r_e in settings:
    q = signal_integrity(r_a, r_e)
    row = " ".join(f"{power_estimate(a, q):10.2f}" for a in AMPLIFIERS.values())
    print(f"{r_a:.1f}  {r_e:.1f}  {q:9.2f} {row}")


# Savings relative to always-on acquisition at 10% integrity:

# In[3]:

for amp in AMPLIFIERS.values():
    full, low = power_estimate(amp, 1.0), power_estimate(amp, 0.1)
    print(f"{amp.name:>10}: {full:.2f} -> {low:.2f} mW ({100 * (1 - low / full):.0f}% less)")
