# Numerical core and service layer