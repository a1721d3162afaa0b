// include/geowx/fft.hpp

// Copyright 2026 The geowx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GEOWX_FFT_HPP_
#define GEOWX_FFT_HPP_

#include <complex>
#include <vector>

namespace geowx {

int next_pow2(int n);

// In-place radix-2 FFT; size must be a power of two. The inverse
// transform includes the 1/N scaling.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace geowx

#endif  // GEOWX_FFT_HPP_
