/*
 * Copyright The SMN Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace smn {

/// Fixed-capacity circular buffer. Slots are never shifted; a cursor marks
/// the newest entry and lag k addresses the entry pushed k pushes ago.
template <typename T>
class RingBuffer {
 public:
  RingBuffer() = default;
  RingBuffer(std::size_t capacity, const T& prototype) : slots_(capacity, prototype) {
    if (capacity == 0) throw std::invalid_argument("ring capacity must be positive");
  }

  std::size_t capacity() const { return slots_.size(); }
  std::size_t fill() const { return fill_; }
  bool full() const { return fill_ == slots_.size(); }

  /// Advances the cursor and returns the slot that now holds lag 0.
  T& advance() {
    cursor_ = (cursor_ + 1) % slots_.size();
    if (fill_ < slots_.size()) ++fill_;
    return slots_[cursor_];
  }

  void push(T value) { advance() = std::move(value); }

  const T& at_lag(std::size_t lag) const { return slots_[index_of(lag)]; }
  T& at_lag(std::size_t lag) { return slots_[index_of(lag)]; }

  void clear() {
    cursor_ = slots_.size() - 1;
    fill_ = 0;
  }

  const std::vector<T>& slots() const { return slots_; }

 private:
  std::size_t index_of(std::size_t lag) const {
    if (lag >= fill_) throw std::out_of_range("ring lag beyond fill");
    return (cursor_ + slots_.size() - lag) % slots_.size();
  }

  std::vector<T> slots_;
  std::size_t cursor_ = static_cast<std::size_t>(-1);
  std::size_t fill_ = 0;
};

}  // namespace smn
