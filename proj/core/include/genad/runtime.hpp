#pragma once

namespace genad {

/// Keeps freed tensor buffers in the heap instead of returning them to the OS
/// after every training step. Process-wide; call once from an executable's main.
void tune_allocator();

}  // namespace genad
