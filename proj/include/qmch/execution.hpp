//---------------------------------------------------------------------------//
//! \file qmch/execution.hpp
//! Block-parallel loop over independent histories with mergeable results.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace qmch
{
//---------------------------------------------------------------------------//
/*!
 * How a leg distributes histories over threads.
 *
 * In deterministic mode every fixed-size block of histories accumulates into
 * its own result and blocks are merged in index order, so floating-point
 * sums do not depend on the thread count or scheduling.
 */
struct ExecutionPolicy
{
    std::size_t threads{1};
    bool deterministic{true};
};

inline constexpr std::size_t history_block_size = 1024;

//---------------------------------------------------------------------------//
/*!
 * Apply body(i, acc) for i in [0, count) and merge the accumulators.
 *
 * Acc must provide `void merge(Acc&&)`; make() returns an empty accumulator.
 */
template<class Acc, class MakeAcc, class Body>
Acc for_each_history(std::size_t count,
                     ExecutionPolicy const& policy,
                     MakeAcc&& make,
                     Body&& body)
{
    std::size_t const nblocks
        = (count + history_block_size - 1) / history_block_size;
    std::size_t const nthreads
        = std::max<std::size_t>(1, std::min(policy.threads, nblocks));

    auto run_block = [&](std::size_t b, Acc& acc) {
        std::size_t const begin = b * history_block_size;
        std::size_t const end = std::min(count, begin + history_block_size);
        for (std::size_t i = begin; i < end; ++i)
            body(i, acc);
    };

    Acc result = make();
    if (policy.deterministic)
    {
        if (nthreads == 1)
        {
            for (std::size_t b = 0; b < nblocks; ++b)
            {
                Acc acc = make();
                run_block(b, acc);
                result.merge(std::move(acc));
            }
            return result;
        }
        std::vector<Acc> blocks;
        blocks.reserve(nblocks);
        for (std::size_t b = 0; b < nblocks; ++b)
            blocks.push_back(make());
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < nthreads; ++t)
        {
            workers.emplace_back([&] {
                for (std::size_t b = next++; b < nblocks; b = next++)
                    run_block(b, blocks[b]);
            });
        }
        workers.clear();
        for (auto& acc : blocks)
            result.merge(std::move(acc));
        return result;
    }

    std::vector<Acc> partial;
    partial.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
        partial.push_back(make());
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < nthreads; ++t)
        {
            workers.emplace_back([&, t] {
                for (std::size_t b = next++; b < nblocks; b = next++)
                    run_block(b, partial[t]);
            });
        }
    }
    for (auto& acc : partial)
        result.merge(std::move(acc));
    return result;
}

//---------------------------------------------------------------------------//
}  // namespace qmch
