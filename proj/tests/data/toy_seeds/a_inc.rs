fn inc(x: i64) -> (result: i64)
    requires
        0 <= x <= 9,
    ensures
        result == x + 1,
{
