//! Compiles and runs every fenced Rust block of the rendered guide as a
//! doctest, keeping the book in lockstep with the library.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(polytopes, "../../../book/src/polytopes.md");
chapter!(
    linear_programming,
    "../../../book/src/linear-programming.md"
);
chapter!(mixed_integer, "../../../book/src/mixed-integer.md");
chapter!(models, "../../../book/src/models.md");
chapter!(encodings, "../../../book/src/encodings.md");
chapter!(reachability, "../../../book/src/reachability.md");
chapter!(certification, "../../../book/src/certification.md");
chapter!(worked_example, "../../../book/src/worked-example.md");
chapter!(cli, "../../../book/src/cli.md");
