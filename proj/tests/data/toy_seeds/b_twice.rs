// full program form
fn twice(x: i64) -> (result: i64)
    requires
        -4 <= x <= 4,
    ensures
        result == x * 2,
{
    x * 2
}
