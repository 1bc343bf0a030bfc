# Root conftest: keeps the repo root on sys.path so `utils`, `schemes`,
# `cli` and `simulate` import the same way the scripts do.
