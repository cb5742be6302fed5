"""Reference values for the regular-graph steady-state table, rounded to two decimals."""

# (k, c) -> (p, p_lower, p_upper)
TABLE1_REFERENCE = {
    (5, 2.0): (0.90, 0.87, 0.92),
    (5, 2.5): (0.89, 0.85, 0.91),
    (5, 3.0): (0.88, 0.83, 0.90),
    (5, 3.5): (0.86, 0.82, 0.89),
    (5, 4.0): (0.84, 0.80, 0.87),
    (5, 5.0): (0.79, 0.75, 0.84),
    (5, 6.0): (0.72, 0.70, 0.79),
    (5, 7.0): (0.65, 0.65, 0.73),
    (5, 8.0): (0.59, 0.59, 0.65),
    (5, 9.0): (0.53, 0.53, 0.57),
    (8, 2.0): (0.92, 0.87, 0.94),
    (8, 2.5): (0.92, 0.85, 0.93),
    (8, 3.0): (0.91, 0.83, 0.93),
    (8, 3.5): (0.90, 0.81, 0.92),
    (8, 4.0): (0.90, 0.80, 0.92),
    (8, 5.0): (0.88, 0.75, 0.90),
    (8, 6.0): (0.84, 0.70, 0.88),
    (8, 7.0): (0.79, 0.65, 0.86),
    (8, 8.0): (0.67, 0.59, 0.83),
    (8, 9.0): (0.54, 0.53, 0.79),
    (10, 2.0): (0.93, 0.87, 0.95),
    (10, 2.5): (0.93, 0.85, 0.94),
    (10, 3.0): (0.93, 0.83, 0.94),
    (10, 3.5): (0.92, 0.82, 0.94),
    (10, 4.0): (0.92, 0.80, 0.93),
    (10, 5.0): (0.91, 0.75, 0.92),
    (10, 6.0): (0.89, 0.70, 0.91),
    (10, 7.0): (0.87, 0.65, 0.90),
    (10, 8.0): (0.83, 0.59, 0.88),
    (10, 9.0): (0.75, 0.52, 0.86),
    (12, 2.0): (0.94, 0.87, 0.95),
    (12, 2.5): (0.94, 0.85, 0.95),
    (12, 3.0): (0.94, 0.83, 0.95),
    (12, 3.5): (0.93, 0.82, 0.94),
    (12, 4.0): (0.93, 0.80, 0.94),
    (12, 5.0): (0.92, 0.75, 0.94),
    (12, 6.0): (0.91, 0.70, 0.93),
    (12, 7.0): (0.90, 0.65, 0.92),
    (12, 8.0): (0.89, 0.59, 0.91),
    (12, 9.0): (0.87, 0.53, 0.90),
    (15, 2.0): (0.95, 0.87, 0.96),
    (15, 2.5): (0.95, 0.85, 0.96),
    (15, 3.0): (0.95, 0.83, 0.96),
    (15, 3.5): (0.95, 0.82, 0.95),
    (15, 4.0): (0.94, 0.80, 0.95),
    (15, 5.0): (0.94, 0.75, 0.95),
    (15, 6.0): (0.94, 0.70, 0.94),
    (15, 7.0): (0.93, 0.65, 0.94),
    (15, 8.0): (0.92, 0.59, 0.93),
    (15, 9.0): (0.92, 0.53, 0.93),
    (20, 2.0): (0.96, 0.87, 0.97),
    (20, 2.5): (0.96, 0.85, 0.97),
    (20, 3.0): (0.96, 0.83, 0.96),
    (20, 3.5): (0.96, 0.81, 0.96),
    (20, 4.0): (0.96, 0.80, 0.96),
    (20, 5.0): (0.96, 0.75, 0.96),
    (20, 6.0): (0.95, 0.70, 0.96),
    (20, 7.0): (0.95, 0.65, 0.96),
    (20, 8.0): (0.95, 0.59, 0.95),
    (20, 9.0): (0.95, 0.53, 0.95),
    (25, 2.0): (0.97, 0.87, 0.97),
    (25, 2.5): (0.97, 0.85, 0.97),
    (25, 3.0): (0.97, 0.83, 0.97),
    (25, 3.5): (0.97, 0.82, 0.97),
    (25, 4.0): (0.97, 0.80, 0.97),
    (25, 5.0): (0.97, 0.75, 0.97),
    (25, 6.0): (0.96, 0.70, 0.97),
    (25, 7.0): (0.96, 0.65, 0.97),
    (25, 8.0): (0.96, 0.59, 0.96),
    (25, 9.0): (0.96, 0.52, 0.96),
    (30, 2.0): (0.97, 0.87, 0.98),
    (30, 2.5): (0.97, 0.85, 0.98),
    (30, 3.0): (0.97, 0.83, 0.97),
    (30, 3.5): (0.97, 0.82, 0.97),
    (30, 4.0): (0.97, 0.80, 0.97),
    (30, 5.0): (0.97, 0.75, 0.97),
    (30, 6.0): (0.97, 0.70, 0.97),
    (30, 7.0): (0.97, 0.65, 0.97),
    (30, 8.0): (0.97, 0.59, 0.97),
    (30, 9.0): (0.97, 0.53, 0.97),
}

TABLE1_TOLERANCE = 0.01
