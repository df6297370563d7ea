#pragma once

// The float and double builds of the library put their symbols in different
// inline namespaces so that both can be linked into one program.
#ifdef DIDER_SCALAR_DOUBLE
#define DIDER_ABI f64
#else
#define DIDER_ABI f32
#endif
