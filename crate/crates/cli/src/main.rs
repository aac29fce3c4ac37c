use nvi_cli::alloc::CountingAlloc;

#[global_allocator]
static GLOBAL: CountingAlloc = CountingAlloc;

fn main() {
    std::process::exit(nvi_cli::run(std::env::args_os()));
}
