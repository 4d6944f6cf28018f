//! Runs the guide's code snippets as doctests so the book can never drift
//! from the library. Each chapter becomes one doc'd item; `cargo test`
//! (doctests) compiles and executes every ```rust``` block in `book/src`.
#![cfg(doctest)]

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub struct $name;
    };
}

chapter!(ModelChapter, "../../../book/src/model.md");
chapter!(FibChapter, "../../../book/src/fib.md");
chapter!(ResailChapter, "../../../book/src/resail.md");
chapter!(BsicChapter, "../../../book/src/bsic.md");
chapter!(MashupChapter, "../../../book/src/mashup.md");
chapter!(MappingChapter, "../../../book/src/mapping.md");
chapter!(ScalingChapter, "../../../book/src/scaling.md");
